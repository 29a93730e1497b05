#include "uwie/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uwie/image_io.hpp"

namespace fs = std::filesystem;

namespace uwie {

namespace {

struct Listing {
  std::map<std::string, fs::path> by_id;
  std::size_t skipped = 0;
};

Listing list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ConfigError("not a directory: " + dir.string());
  Listing listing;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    if (sniff_file(file) == ImageFormat::unknown) {
      ++listing.skipped;
      continue;
    }
    const auto id = file.stem().string();
    if (!listing.by_id.emplace(id, file).second) {
      throw ConfigError("duplicate image id '" + id + "' in " + dir.string());
    }
  }
  return listing;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 10) {
      out += ", ... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}

}  // namespace

UiebSplit load_uieb(const fs::path& root, std::size_t split_index, const UiebLayout& layout) {
  const auto raw = list_images(root / layout.raw_dir);
  const auto ref = list_images(root / layout.reference_dir);

  UiebSplit split;
  split.train.split = Split::train;
  split.test.split = Split::test;
  if (raw.skipped + ref.skipped > 0) {
    split.warnings.push_back("skipped " + std::to_string(raw.skipped + ref.skipped) +
                             " non-image files");
  }

  std::vector<std::string> orphan_raw;
  std::vector<std::string> orphan_ref;
  for (const auto& [id, path] : raw.by_id) {
    if (!ref.by_id.contains(id)) orphan_raw.push_back(id);
  }
  for (const auto& [id, path] : ref.by_id) {
    if (!raw.by_id.contains(id)) orphan_ref.push_back(id);
  }
  if (!orphan_raw.empty() || !orphan_ref.empty()) {
    std::string msg = "unpaired UIEB files:";
    if (!orphan_raw.empty()) msg += " raw without reference: " + join_ids(orphan_raw) + ";";
    if (!orphan_ref.empty()) msg += " reference without raw: " + join_ids(orphan_ref) + ";";
    throw ConfigError(msg);
  }
  if (raw.by_id.empty()) throw ConfigError("no images found under " + root.string());

  std::vector<PairedEntry> all;
  for (const auto& [id, path] : raw.by_id) all.push_back({path, ref.by_id.at(id), id});

  std::size_t n_train = split_index;
  if (all.size() != kUiebImageCount) {
    n_train = static_cast<std::size_t>(std::llround(
        static_cast<double>(all.size()) * static_cast<double>(split_index) /
        static_cast<double>(kUiebImageCount)));
    split.warnings.push_back("expected " + std::to_string(kUiebImageCount) + " pairs, found " +
                             std::to_string(all.size()) + "; splitting proportionally (" +
                             std::to_string(n_train) + " train)");
  }
  n_train = std::min(n_train, all.size());
  split.train.entries.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.entries.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return split;
}

UnpairedDataset load_directory(const fs::path& root) {
  const auto listing = list_images(root);
  if (listing.by_id.empty()) throw ConfigError("no PNG/JPEG images in " + root.string());
  UnpairedDataset out;
  out.skipped = listing.skipped;
  std::vector<UnpairedEntry> entries;
  for (const auto& [id, path] : listing.by_id) entries.push_back({path, id});
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.path.filename() < b.path.filename();
  });
  out.entries = std::move(entries);
  return out;
}

std::vector<TrainingPair> load_training_pairs(const PairedDataset& dataset) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(dataset.entries.size());
  for (const auto& e : dataset.entries) {
    pairs.push_back({e.id, load_image(e.raw), load_image(e.reference)});
  }
  return pairs;
}

}  // namespace uwie
