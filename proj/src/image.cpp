#include "pollisim/image.hpp"

#include <cctype>
#include <fstream>

namespace pollisim {

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
      return tok;
    }
  }
  throw ImageIoError("unexpected end of PPM header");
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path);
  if (next_token(in) != "P6") throw ImageIoError(path + ": not a binary P6 pixmap");
  Image img;
  try {
    img.width = std::stoi(next_token(in));
    img.height = std::stoi(next_token(in));
    const int maxval = std::stoi(next_token(in));
    if (maxval != 255) throw ImageIoError(path + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw ImageIoError(path + ": malformed PPM header");
  }
  if (img.width <= 0 || img.height <= 0) throw ImageIoError(path + ": bad dimensions");
  in.get();  // single whitespace after maxval
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.data.size())
    throw ImageIoError(path + ": truncated pixel data");
  return img;
}

void write_ppm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

}  // namespace pollisim
