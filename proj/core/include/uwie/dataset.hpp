#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uwie/training.hpp"

namespace uwie {

enum class Split { train, test };

struct PairedEntry {
  std::filesystem::path raw;
  std::filesystem::path reference;
  std::string id;
};

struct PairedDataset {
  std::vector<PairedEntry> entries;  // sorted by id
  Split split = Split::train;
};

struct UnpairedEntry {
  std::filesystem::path path;
  std::string id;
};

struct UnpairedDataset {
  std::vector<UnpairedEntry> entries;  // sorted by file name
  std::size_t skipped = 0;             // files that are not PNG/JPEG
};

struct UiebLayout {
  std::string raw_dir = "raw-890";
  std::string reference_dir = "reference-890";
};

inline constexpr std::size_t kUiebImageCount = 890;
inline constexpr std::size_t kUiebTrainCount = 700;

struct UiebSplit {
  PairedDataset train;
  PairedDataset test;
  std::vector<std::string> warnings;
};

// Pairs raw and reference images by file stem and splits the sorted list: the first
// `split_index` go to train, the rest to test. A corpus whose size is not 890 still loads, with
// a warning, and is split proportionally at split_index / 890. Orphans raise ConfigError.
UiebSplit load_uieb(const std::filesystem::path& root, std::size_t split_index = kUiebTrainCount,
                    const UiebLayout& layout = {});

// Every PNG/JPEG file directly inside `root`, by file name. Throws ConfigError if none.
UnpairedDataset load_directory(const std::filesystem::path& root);

// Decodes every pair.
std::vector<TrainingPair> load_training_pairs(const PairedDataset& dataset);

}  // namespace uwie
