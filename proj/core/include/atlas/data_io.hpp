// SPDX-License-Identifier: Apache-2.0
//
// Embedding dataset files and task directories.
//
//   images:       "# images C=<int> d=<int>", then rows id,label,e_0,...,e_{d-1}
//   class_texts:  "# class_texts C=<int> d=<int>", then rows class_index,class_name,e_0,...
//   prompt:       "# prompt M=<int> d=<int>", then M rows of d values
//
// Readers report the offending line number on every validation failure.

#ifndef ATLAS_DATA_IO_HPP
#define ATLAS_DATA_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "atlas/harness.hpp"
#include "atlas/model.hpp"

namespace atlas {

struct ImageDataset {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<ImageSample> samples;

  friend bool operator==(const ImageDataset&, const ImageDataset&) = default;
};

/// All samples must have labels over `num_classes` classes and embeddings of one dimension.
void write_image_embeddings(std::ostream& out, const ImageDataset& data);
ImageDataset read_image_embeddings(std::istream& in);
/// Throws std::runtime_error if the file cannot be opened.
ImageDataset load_image_embeddings(const std::filesystem::path& path);
void save_image_embeddings(const std::filesystem::path& path, const ImageDataset& data);

void write_class_embeddings(std::ostream& out, const ClassVocabulary& vocab);
/// Rows may come in any order; the vocabulary is indexed by class_index.
ClassVocabulary read_class_embeddings(std::istream& in);
ClassVocabulary load_class_embeddings(const std::filesystem::path& path);
void save_class_embeddings(const std::filesystem::path& path, const ClassVocabulary& vocab);

void write_prompt(std::ostream& out, const PromptParams& v);
PromptParams read_prompt(std::istream& in);
PromptParams load_prompt(const std::filesystem::path& path);
void save_prompt(const std::filesystem::path& path, const PromptParams& v);

/// What a task directory needs beyond its CSV files to rebuild the frozen
/// encoder and the initial prompt.
struct TaskMeta {
  std::uint64_t seed = 0;
  std::size_t base_classes = 0;
  std::size_t prompt_length = 4;
  std::size_t prompt_dim = 8;
};

// Task directory layout.
inline constexpr const char* kTrainFile = "train.csv";
inline constexpr const char* kTestFile = "test.csv";
inline constexpr const char* kClassTextsFile = "class_texts.csv";
inline constexpr const char* kTaskMetaFile = "task.cfg";

/// Writes train.csv, test.csv, class_texts.csv and task.cfg.
void save_task(const std::filesystem::path& dir, const Task& task, std::uint64_t seed);

/// Reads a task directory. task.cfg and test.csv are optional; without
/// task.cfg, `fallback` supplies the seed and prompt shape and every class
/// seen in train.csv counts as a base class. The encoder and the initial
/// prompt are regenerated from the seed.
Task load_task(const std::filesystem::path& dir, const TaskMeta& fallback);

}  // namespace atlas

#endif  // ATLAS_DATA_IO_HPP
