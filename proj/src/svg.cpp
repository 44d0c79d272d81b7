#include "boxrefine/svg.hpp"

#include "boxrefine/errors.hpp"

#include <cstdio>
#include <sstream>

namespace boxrefine {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void rect(std::ostringstream& os, const Box& b, const char* layer, const char* color,
          const std::string& caption) {
  os << "  <rect class=\"" << layer << "\" x=\"" << num(b.x1()) << "\" y=\"" << num(b.y1())
     << "\" width=\"" << num(b.width()) << "\" height=\"" << num(b.height())
     << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
  os << "  <text x=\"" << num(b.x1() + 2) << "\" y=\"" << num(b.y1() + 12) << "\" fill=\"" << color
     << "\" font-size=\"10\">" << escape(caption) << "</text>\n";
}

}  // namespace

LayerSet parse_layers(const std::string& list) {
  LayerSet out;
  std::istringstream in(list);
  std::string item;
  std::initializer_list<std::pair<const char*, Layer>> names = {
      {"original", Layer::kOriginal},     {"corrected", Layer::kCorrected},
      {"mined", Layer::kMined},           {"detections", Layer::kDetections},
      {"ground-truth", Layer::kGroundTruth}};
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") return LayerSet::all();
    bool found = false;
    for (const auto& [name, layer] : names) {
      if (item == name) {
        out.insert(layer);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown layer '" + item + "'");
  }
  return out;
}

std::string render_svg(const ImageRecord& record, LayerSet layers,
                       std::span<const Annotation> ground_truth) {
  const double w = record.width > 0 ? record.width : 1;
  const double h = record.height > 0 ? record.height : 1;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(w)
     << "\" height=\"" << num(h) << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n"
     << "  <title>" << escape(record.id) << "</title>\n"
     << "  <path class=\"frame\" d=\"M0 0 H" << num(w) << " V" << num(h)
     << " H0 Z\" fill=\"#404040\" stroke=\"#808080\"/>\n";

  if (layers.contains(Layer::kGroundTruth)) {
    for (const auto& a : ground_truth) rect(os, a.box, "ground-truth", "black", std::to_string(a.label));
  }
  for (const auto& a : record.annotations) {
    switch (a.provenance) {
      case Provenance::kOriginal:
        if (layers.contains(Layer::kOriginal)) rect(os, a.box, "original", "red", std::to_string(a.label));
        break;
      case Provenance::kCorrected:
        if (layers.contains(Layer::kCorrected)) rect(os, a.box, "corrected", "green", std::to_string(a.label));
        break;
      case Provenance::kMined:
        if (layers.contains(Layer::kMined)) rect(os, a.box, "mined", "blue", std::to_string(a.label));
        break;
    }
  }
  if (layers.contains(Layer::kDetections) && record.detections) {
    for (const auto& d : *record.detections) {
      rect(os, d.box, "detections", "white", std::to_string(d.label) + " " + num(d.prob));
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace boxrefine
