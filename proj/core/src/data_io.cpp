// SPDX-License-Identifier: Apache-2.0

#include "atlas/data_io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "atlas/csv.hpp"

namespace atlas {

namespace fs = std::filesystem;

namespace {

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    if (!csv::trim(line).empty()) return true;
  }
  return false;
}

std::size_t positive_header_int(const std::map<std::string, std::string>& header,
                                const std::string& key, std::size_t line_number) {
  const long long v = csv::parse_int(csv::require_key(header, key, line_number), line_number);
  if (v < 1) throw csv::ParseError(line_number, key + " must be positive");
  return static_cast<std::size_t>(v);
}

void require_plain_field(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",\n\r") != std::string::npos ||
      csv::trim(s).size() != s.size()) {
    throw std::invalid_argument(std::string(what) + " '" + s +
                                "' must be non-empty without commas or surrounding spaces");
  }
}

void write_values(std::ostream& out, std::span<const double> values) {
  for (double x : values) out << ',' << csv::format_double(x);
}

Vector parse_values(const std::vector<std::string>& fields, std::size_t first, std::size_t line) {
  Vector v(fields.size() - first);
  for (std::size_t i = first; i < fields.size(); ++i) v[i - first] = csv::parse_double(fields[i], line);
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Prefixes parse errors with the file name so CLI messages say where to look.
template <typename Fn>
auto with_path(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const csv::ParseError& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_image_embeddings(std::ostream& out, const ImageDataset& data) {
  out << "# images C=" << data.num_classes << " d=" << data.dim << '\n';
  for (const auto& s : data.samples) {
    require_plain_field(s.id, "sample id");
    if (s.embedding.size() != data.dim) {
      throw std::invalid_argument("sample " + s.id + " has dimension " +
                                  std::to_string(s.embedding.size()) + ", expected " +
                                  std::to_string(data.dim));
    }
    if (s.label.num_classes() != data.num_classes) {
      throw std::invalid_argument("sample " + s.id + " is labelled over a different class count");
    }
    out << s.id << ',' << s.label.class_index();
    write_values(out, s.embedding);
    out << '\n';
  }
}

ImageDataset read_image_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number)) throw csv::ParseError(1, "empty images file");
  const auto header = csv::parse_header(line, "images", line_number);
  ImageDataset data;
  data.num_classes = positive_header_int(header, "C", line_number);
  data.dim = positive_header_int(header, "d", line_number);

  std::set<std::string> ids;
  while (next_content_line(in, line, line_number)) {
    const auto fields = csv::split(line);
    if (fields.size() != data.dim + 2) {
      throw csv::ParseError(line_number, "expected id, label and " + std::to_string(data.dim) +
                                             " values, got " + std::to_string(fields.size()) +
                                             " fields");
    }
    if (fields[0].empty()) throw csv::ParseError(line_number, "empty sample id");
    if (!ids.insert(fields[0]).second) {
      throw csv::ParseError(line_number, "duplicate sample id '" + fields[0] + "'");
    }
    const long long label = csv::parse_int(fields[1], line_number);
    if (label < 0 || static_cast<std::size_t>(label) >= data.num_classes) {
      throw csv::ParseError(line_number, "label " + fields[1] + " outside [0, " +
                                             std::to_string(data.num_classes) + ")");
    }
    data.samples.push_back({fields[0], parse_values(fields, 2, line_number),
                            OneHotLabel(static_cast<std::size_t>(label), data.num_classes)});
  }
  return data;
}

ImageDataset load_image_embeddings(const fs::path& path) {
  auto in = open_in(path);
  return with_path(path, [&] { return read_image_embeddings(in); });
}

void save_image_embeddings(const fs::path& path, const ImageDataset& data) {
  auto out = open_out(path);
  write_image_embeddings(out, data);
}

void write_class_embeddings(std::ostream& out, const ClassVocabulary& vocab) {
  out << "# class_texts C=" << vocab.size() << " d=" << vocab.token_dim() << '\n';
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    require_plain_field(vocab.name(c), "class name");
    out << c << ',' << vocab.name(c);
    write_values(out, vocab.token(c));
    out << '\n';
  }
}

ClassVocabulary read_class_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number)) throw csv::ParseError(1, "empty class_texts file");
  const auto header = csv::parse_header(line, "class_texts", line_number);
  const std::size_t c = positive_header_int(header, "C", line_number);
  const std::size_t d = positive_header_int(header, "d", line_number);
  const std::size_t header_line = line_number;

  std::vector<Vector> tokens(c);
  std::vector<std::string> names(c);
  std::vector<bool> seen(c, false);
  while (next_content_line(in, line, line_number)) {
    const auto fields = csv::split(line);
    if (fields.size() != d + 2) {
      throw csv::ParseError(line_number, "expected class_index, class_name and " +
                                             std::to_string(d) + " values, got " +
                                             std::to_string(fields.size()) + " fields");
    }
    const long long idx = csv::parse_int(fields[0], line_number);
    if (idx < 0 || static_cast<std::size_t>(idx) >= c) {
      throw csv::ParseError(line_number, "class index " + fields[0] + " outside [0, " +
                                             std::to_string(c) + ")");
    }
    const auto i = static_cast<std::size_t>(idx);
    if (seen[i]) throw csv::ParseError(line_number, "duplicate class index " + fields[0]);
    if (fields[1].empty()) throw csv::ParseError(line_number, "empty class name");
    seen[i] = true;
    names[i] = fields[1];
    tokens[i] = parse_values(fields, 2, line_number);
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (!seen[i]) throw csv::ParseError(header_line, "class index " + std::to_string(i) + " missing");
  }
  try {
    return ClassVocabulary(std::move(tokens), std::move(names));
  } catch (const std::invalid_argument& e) {
    throw csv::ParseError(header_line, e.what());
  }
}

ClassVocabulary load_class_embeddings(const fs::path& path) {
  auto in = open_in(path);
  return with_path(path, [&] { return read_class_embeddings(in); });
}

void save_class_embeddings(const fs::path& path, const ClassVocabulary& vocab) {
  auto out = open_out(path);
  write_class_embeddings(out, vocab);
}

void write_prompt(std::ostream& out, const PromptParams& v) {
  out << "# prompt M=" << v.length() << " d=" << v.dim() << '\n';
  for (std::size_t i = 0; i < v.length(); ++i) {
    const auto row = v.vector(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k > 0) out << ',';
      out << csv::format_double(row[k]);
    }
    out << '\n';
  }
}

PromptParams read_prompt(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number)) throw csv::ParseError(1, "empty prompt file");
  const auto header = csv::parse_header(line, "prompt", line_number);
  const std::size_t m = positive_header_int(header, "M", line_number);
  const std::size_t d = positive_header_int(header, "d", line_number);
  Vector values;
  values.reserve(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    if (!next_content_line(in, line, line_number)) {
      throw csv::ParseError(line_number + 1, "expected " + std::to_string(m) + " rows");
    }
    const auto fields = csv::split(line);
    if (fields.size() != d) {
      throw csv::ParseError(line_number, "expected " + std::to_string(d) + " values");
    }
    for (const auto& f : fields) values.push_back(csv::parse_double(f, line_number));
  }
  if (next_content_line(in, line, line_number)) {
    throw csv::ParseError(line_number, "unexpected trailing row");
  }
  return PromptParams(m, d, std::move(values));
}

PromptParams load_prompt(const fs::path& path) {
  auto in = open_in(path);
  return with_path(path, [&] { return read_prompt(in); });
}

void save_prompt(const fs::path& path, const PromptParams& v) {
  auto out = open_out(path);
  write_prompt(out, v);
}

void save_task(const fs::path& dir, const Task& task, std::uint64_t seed) {
  fs::create_directories(dir);
  const auto& dims = task.encoder.dims();
  save_image_embeddings(dir / kTrainFile, {task.base_classes, dims.embed_dim, task.train});
  save_image_embeddings(dir / kTestFile, {task.num_classes(), dims.embed_dim, task.test});
  save_class_embeddings(dir / kClassTextsFile, task.vocab);
  auto out = open_out(dir / kTaskMetaFile);
  out << "seed=" << seed << '\n'
      << "c-base=" << task.base_classes << '\n'
      << "M=" << dims.prompt_length << '\n'
      << "d-p=" << dims.prompt_dim << '\n';
}

Task load_task(const fs::path& dir, const TaskMeta& fallback) {
  TaskMeta meta = fallback;
  bool have_meta = false;
  if (fs::exists(dir / kTaskMetaFile)) {
    auto in = open_in(dir / kTaskMetaFile);
    const auto kv = with_path(dir / kTaskMetaFile, [&] { return csv::parse_key_values(in); });
    const auto get = [&](const char* key) -> std::size_t {
      auto it = kv.find(key);
      if (it == kv.end()) {
        throw std::invalid_argument((dir / kTaskMetaFile).string() + ": missing '" + key + "'");
      }
      return static_cast<std::size_t>(csv::parse_int(it->second, 0));
    };
    meta.seed = get("seed");
    meta.base_classes = get("c-base");
    meta.prompt_length = get("M");
    meta.prompt_dim = get("d-p");
    have_meta = true;
  }

  ImageDataset train = load_image_embeddings(dir / kTrainFile);
  ClassVocabulary vocab = load_class_embeddings(dir / kClassTextsFile);
  if (!have_meta) meta.base_classes = train.num_classes;
  if (train.num_classes != meta.base_classes) {
    throw std::invalid_argument("train.csv has C=" + std::to_string(train.num_classes) +
                                " but the task declares " + std::to_string(meta.base_classes) +
                                " base classes");
  }
  if (meta.base_classes < 2 || meta.base_classes > vocab.size()) {
    throw std::invalid_argument("base class count " + std::to_string(meta.base_classes) +
                                " incompatible with " + std::to_string(vocab.size()) +
                                " class texts");
  }

  std::vector<ImageSample> test;
  if (fs::exists(dir / kTestFile)) {
    ImageDataset t = load_image_embeddings(dir / kTestFile);
    if (t.num_classes != vocab.size()) {
      throw std::invalid_argument("test.csv has C=" + std::to_string(t.num_classes) + " but " +
                                  std::to_string(vocab.size()) + " class texts exist");
    }
    if (t.dim != train.dim) throw std::invalid_argument("test.csv and train.csv dimensions differ");
    test = std::move(t.samples);
  }

  ModelDims dims{meta.prompt_length, meta.prompt_dim, vocab.token_dim(), train.dim};
  auto encoder = FrozenEncoder::random(dims, meta.seed);
  auto init = PromptParams::random(dims.prompt_length, dims.prompt_dim, meta.seed);
  return Task{std::move(train.samples), std::move(test), std::move(vocab), std::move(encoder),
              std::move(init), meta.base_classes};
}

}  // namespace atlas
