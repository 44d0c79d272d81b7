#include "boxrefine/coco_io.hpp"

#include "boxrefine/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace boxrefine {

using nlohmann::json;

namespace {

std::string id_string(const json& id, const std::string& where) {
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw ParseError(where + ": id must be a string or integer");
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

Dataset parse_coco_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("top-level JSON value must be an object");

  Dataset ds;

  if (doc.contains("categories")) {
    const json& cats = doc["categories"];
    if (!cats.is_array()) throw ParseError("categories: expected an array");
    std::map<int, std::string> names;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const std::string where = "categories[" + std::to_string(i) + "]";
      const int id = field<int>(cats[i], "id", where);
      if (id < 1) throw ParseError(where + ".id: category ids start at 1");
      names[id] = cats[i].contains("name") ? field<std::string>(cats[i], "name", where) : "";
    }
    if (!names.empty()) {
      ds.class_names.resize(static_cast<std::size_t>(names.rbegin()->first));
      for (const auto& [id, name] : names) ds.class_names[static_cast<std::size_t>(id - 1)] = name;
    }
  }

  std::unordered_map<std::string, std::size_t> index;
  if (doc.contains("images")) {
    const json& imgs = doc["images"];
    if (!imgs.is_array()) throw ParseError("images: expected an array");
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const std::string where = "images[" + std::to_string(i) + "]";
      if (!imgs[i].is_object() || !imgs[i].contains("id")) throw ParseError(where + ": missing field 'id'");
      ImageRecord rec;
      rec.id = id_string(imgs[i]["id"], where + ".id");
      rec.width = imgs[i].contains("width") ? field<int>(imgs[i], "width", where) : 0;
      rec.height = imgs[i].contains("height") ? field<int>(imgs[i], "height", where) : 0;
      if (rec.width < 0 || rec.height < 0) throw ValidationError(where + ": negative image extent");
      if (!index.emplace(rec.id, ds.images.size()).second) {
        throw ValidationError("duplicate image id " + rec.id);
      }
      ds.images.push_back(std::move(rec));
    }
  }

  std::vector<std::string> bad_boxes;
  std::vector<std::string> unknown_images;
  if (doc.contains("annotations")) {
    const json& anns = doc["annotations"];
    if (!anns.is_array()) throw ParseError("annotations: expected an array");
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const json& a = anns[i];
      const std::string where = "annotations[" + std::to_string(i) + "]";
      if (!a.is_object()) throw ParseError(where + ": expected an object");
      const std::string ann_id = a.contains("id") ? id_string(a["id"], where + ".id") : std::to_string(i);
      if (!a.contains("image_id")) throw ParseError(where + ": missing field 'image_id'");
      const std::string image_id = id_string(a["image_id"], where + ".image_id");
      const auto bbox = field<std::vector<double>>(a, "bbox", where);
      if (bbox.size() != 4) throw ParseError(where + ".bbox: expected 4 numbers");
      const int label = field<int>(a, "category_id", where);
      if (label < 1) throw ValidationError(where + ".category_id: class ids start at 1");

      if (!(bbox[2] > 0) || !(bbox[3] > 0)) {
        bad_boxes.push_back(ann_id);
        continue;
      }
      auto it = index.find(image_id);
      if (it == index.end()) {
        unknown_images.push_back(image_id);
        continue;
      }
      if (label > ds.class_count()) ds.class_names.resize(static_cast<std::size_t>(label));

      ImageRecord& rec = ds.images[it->second];
      // bbox_xyxy carries the exact corners; x + w can differ in the last ulp.
      Box box = Box::from_xywh(bbox[0], bbox[1], bbox[2], bbox[3]);
      if (a.contains("bbox_xyxy")) {
        const auto xyxy = field<std::vector<double>>(a, "bbox_xyxy", where);
        if (xyxy.size() != 4) throw ParseError(where + ".bbox_xyxy: expected 4 numbers");
        box = Box(xyxy[0], xyxy[1], xyxy[2], xyxy[3]);
      }
      if (a.contains("score")) {
        const double prob = field<double>(a, "score", where);
        Detection d = a.contains("logit") ? Detection{box, label, prob, field<double>(a, "logit", where)}
                                          : Detection::from_prob(box, label, prob);
        if (!rec.detections) rec.detections.emplace();
        rec.detections->push_back(d);
      } else {
        Provenance prov = Provenance::kOriginal;
        if (a.contains("provenance")) {
          try {
            prov = provenance_from_string(field<std::string>(a, "provenance", where));
          } catch (const ParseError& e) {
            throw ParseError(where + ".provenance: " + e.what());
          }
        }
        rec.annotations.push_back({box, label, prov});
      }
    }
  }

  if (!bad_boxes.empty()) {
    std::string msg = "bbox with non-positive width or height in annotations:";
    for (const auto& id : bad_boxes) msg += " " + id;
    throw ValidationError(msg);
  }
  if (!unknown_images.empty()) {
    std::string msg = "annotations reference unknown image ids:";
    for (const auto& id : unknown_images) msg += " " + id;
    throw ValidationError(msg);
  }
  return ds;
}

std::string to_coco_json(const Dataset& dataset) {
  json images = json::array();
  json anns = json::array();
  long long next_id = 1;
  for (const auto& img : dataset.images) {
    images.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
    for (const auto& a : img.annotations) {
      anns.push_back({{"id", next_id++},
                      {"image_id", img.id},
                      {"bbox", {a.box.x1(), a.box.y1(), a.box.width(), a.box.height()}},
                      {"bbox_xyxy", {a.box.x1(), a.box.y1(), a.box.x2(), a.box.y2()}},
                      {"category_id", a.label},
                      {"provenance", std::string(to_string(a.provenance))}});
    }
    if (img.detections) {
      for (const auto& d : *img.detections) {
        anns.push_back({{"id", next_id++},
                        {"image_id", img.id},
                        {"bbox", {d.box.x1(), d.box.y1(), d.box.width(), d.box.height()}},
                        {"bbox_xyxy", {d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2()}},
                        {"category_id", d.label},
                        {"score", d.prob},
                        {"logit", d.logit}});
      }
    }
  }
  json cats = json::array();
  for (std::size_t i = 0; i < dataset.class_names.size(); ++i) {
    cats.push_back({{"id", static_cast<int>(i + 1)}, {"name", dataset.class_names[i]}});
  }
  json doc = {{"images", images}, {"annotations", anns}, {"categories", cats}};
  return doc.dump(2) + "\n";
}

std::vector<PointAnnotation> parse_point_csv(std::string_view text) {
  std::vector<PointAnnotation> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "image_id,x,y,label") {
        throw ParseError("line " + std::to_string(lineno) + ": expected header 'image_id,x,y,label'");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      cells.push_back(line.substr(start, pos - start));
    }
    cells.push_back(line.substr(start));
    if (cells.size() != 4) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 4 fields, got " +
                       std::to_string(cells.size()));
    }
    static constexpr const char* kNames[] = {"image_id", "x", "y", "label"};
    auto number = [&](std::size_t col, auto& value) {
      const std::string& s = cells[col];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(lineno) + ", field '" + kNames[col] +
                         "': invalid number '" + s + "'");
      }
    };
    PointAnnotation p;
    p.image_id = cells[0];
    if (p.image_id.empty()) throw ParseError("line " + std::to_string(lineno) + ", field 'image_id': empty");
    number(1, p.x);
    number(2, p.y);
    number(3, p.label);
    out.push_back(std::move(p));
  }
  if (!header_seen) throw ParseError("line 1: expected header 'image_id,x,y,label'");
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void save_coco_json(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, to_coco_json(dataset));
}

Dataset load_annotations(const std::filesystem::path& path, AnnotationFormat format) {
  const std::string text = read_text_file(path);
  if (format == AnnotationFormat::kCocoJson) return parse_coco_json(text);

  Dataset ds;
  std::unordered_map<std::string, std::size_t> index;
  int max_label = 0;
  for (auto& p : parse_point_csv(text)) {
    auto [it, inserted] = index.emplace(p.image_id, ds.images.size());
    if (inserted) ds.images.push_back(ImageRecord{.id = p.image_id});
    max_label = std::max(max_label, p.label);
    ds.images[it->second].points.push_back(std::move(p));
  }
  for (int l = 1; l <= max_label; ++l) ds.class_names.push_back(std::to_string(l));
  return ds;
}

}  // namespace boxrefine
