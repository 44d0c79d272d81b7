#pragma once

#include "boxrefine/records.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace boxrefine {

enum class AnnotationFormat { kCocoJson, kPointCsv };

/// Reads a dataset file. COCO subset: images[{id,width,height}],
/// annotations[{image_id,bbox:[x,y,w,h],category_id,score?}], categories.
/// Entries with a score become detections, the rest annotations. Point CSV
/// rows `image_id,x,y,label` are attached to their images as points; image
/// extents stay unknown (0).
///
/// Throws ParseError for malformed input (naming the line or field) and
/// ValidationError for non-positive bbox extents (listing annotation ids).
Dataset load_annotations(const std::filesystem::path& path, AnnotationFormat format);

Dataset parse_coco_json(std::string_view text);
std::string to_coco_json(const Dataset& dataset);
void save_coco_json(const Dataset& dataset, const std::filesystem::path& path);

std::vector<PointAnnotation> parse_point_csv(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes `text` verbatim (binary mode, no newline translation).
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace boxrefine
