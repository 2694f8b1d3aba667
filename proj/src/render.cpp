#include "pollisim/render.hpp"

#include <fstream>
#include <iomanip>

namespace pollisim {

namespace {

const char* phase_color(MissionPhase phase) {
  switch (phase) {
    case MissionPhase::kInspect: return "#1f77b4";
    case MissionPhase::kDrive: return "#ff7f0e";
    case MissionPhase::kInit: return "#7f7f7f";
    case MissionPhase::kSelectCell: return "#7f7f7f";
    case MissionPhase::kWorkspaceSurvey: return "#9467bd";
    case MissionPhase::kPollinateSequence: return "#d62728";
    case MissionPhase::kDone: return "#7f7f7f";
  }
  return "#000000";
}

const char* flower_color(FlowerState state) {
  switch (state) {
    case FlowerState::kBud: return "#a0a0a0";
    case FlowerState::kReady: return "#e6b800";
    case FlowerState::kPollinated: return "#2ca02c";
    case FlowerState::kWilted: return "#8c564b";
  }
  return "#000000";
}

}  // namespace

void write_map_svg(const std::string& path, const Mission& mission) {
  const WorldConfig& cfg = mission.scenario().world;
  const double margin = 0.5;
  const double scale = 100.0;
  const double w = (cfg.room_width + 2 * margin) * scale;
  const double h = (cfg.room_length + 2 * margin) * scale;

  std::ofstream out(path);
  out << std::fixed << std::setprecision(1);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  // world coordinates, y up
  out << "<g transform=\"translate(" << margin * scale << "," << h - margin * scale
      << ") scale(" << scale << ",-" << scale << ")\">\n";

  out << "<rect x=\"0\" y=\"0\" width=\"" << cfg.room_width << "\" height=\""
      << cfg.room_length << "\" fill=\"#fcfcf7\" stroke=\"#222\" stroke-width=\"0.04\"/>\n";

  out << std::setprecision(4);
  for (const PlantRow& row : cfg.rows) {
    const auto corners = row.rect().corners();
    out << "<polygon points=\"";
    for (const Vec2& c : corners) out << c.x << "," << c.y << " ";
    out << "\" fill=\"#c8e0b8\" stroke=\"#3a6b2a\" stroke-width=\"0.02\"/>\n";
    for (int k = 1; k < row.cells_per_side; ++k) {
      const Vec2 p = row.centerline_point(k * row.cell_length());
      const Vec2 n = row.side_normal(Side::kLeft) * row.half_width;
      out << "<line x1=\"" << p.x + n.x << "\" y1=\"" << p.y + n.y << "\" x2=\""
          << p.x - n.x << "\" y2=\"" << p.y - n.y
          << "\" stroke=\"#3a6b2a\" stroke-width=\"0.01\"/>\n";
    }
  }

  const VoronoiGraph& g = mission.roadmap();
  for (const VoronoiEdge& e : g.edges) {
    out << "<line x1=\"" << g.nodes[e.a].x << "\" y1=\"" << g.nodes[e.a].y << "\" x2=\""
        << g.nodes[e.b].x << "\" y2=\"" << g.nodes[e.b].y
        << "\" stroke=\"#b9d4e8\" stroke-width=\"0.015\"/>\n";
  }

  const auto& traj = mission.trajectory();
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    if ((traj[i + 1].pose.position() - traj[i].pose.position()).norm() < 1e-6) continue;
    out << "<line x1=\"" << traj[i].pose.x << "\" y1=\"" << traj[i].pose.y << "\" x2=\""
        << traj[i + 1].pose.x << "\" y2=\"" << traj[i + 1].pose.y << "\" stroke=\""
        << phase_color(traj[i + 1].phase) << "\" stroke-width=\"0.025\"/>\n";
  }

  for (const Flower& f : mission.world().flowers) {
    out << "<circle cx=\"" << f.position.x << "\" cy=\"" << f.position.y
        << "\" r=\"0.05\" fill=\"" << flower_color(f.state) << "\"/>\n";
  }

  out << "</g>\n</svg>\n";
}

}  // namespace pollisim
