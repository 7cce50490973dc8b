#include "tnfeat/dataset.hpp"

#include "tnfeat/error.hpp"
#include "tnfeat/image_io.hpp"
#include "tnfeat/parallel.hpp"
#include "tnfeat/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace tnfeat::dataset {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void Manifest::recount() {
  const std::size_t k = classes.size();
  raw_counts.assign(k, 0);
  clean_counts.assign(k, 0);
  for (const Record& r : records) {
    if (r.class_id < 0 || static_cast<std::size_t>(r.class_id) >= k) {
      throw Error(Errc::InvalidLabel, "record " + r.path + " has class id outside the class map");
    }
    ++raw_counts[static_cast<std::size_t>(r.class_id)];
    if (r.clean()) ++clean_counts[static_cast<std::size_t>(r.class_id)];
  }
  raw_total = records.size();
  clean_total = 0;
  for (std::size_t c : clean_counts) clean_total += c;
}

std::vector<std::size_t> Manifest::clean_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].clean()) out.push_back(i);
  }
  return out;
}

std::vector<int> Manifest::clean_labels() const {
  std::vector<int> out;
  for (const Record& r : records) {
    if (r.clean()) out.push_back(r.class_id);
  }
  return out;
}

ClassMap scan_classes(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::IoError, "dataset root is not a directory: " + root.string());
  ClassMap map;
  fs::directory_iterator it(root, ec);
  if (ec) throw Error(Errc::IoError, "cannot list " + root.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (entry.is_directory()) map.names.push_back(entry.path().filename().string());
  }
  if (map.names.empty()) throw Error(Errc::NoClassesFound, "no class folders under " + root.string());
  std::sort(map.names.begin(), map.names.end());
  return map;
}

Manifest list_files(const fs::path& root, const ClassMap& classes) {
  Manifest m;
  m.classes = classes;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const fs::path dir = root / classes.names[c];
    std::vector<std::string> files;
    std::error_code ec;
    fs::recursive_directory_iterator it(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot list " + dir.string() + ": " + ec.message());
    for (auto end = fs::recursive_directory_iterator(); it != end; it.increment(ec)) {
      if (ec) throw Error(Errc::IoError, "cannot list " + dir.string() + ": " + ec.message());
      if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root).generic_string());
    }
    if (ec) throw Error(Errc::IoError, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      Record r;
      r.path = std::move(f);
      r.class_id = static_cast<int>(c);
      m.records.push_back(std::move(r));
    }
  }
  m.recount();
  return m;
}

IngestResult build_manifest(const fs::path& root, const ClassMap& classes, std::size_t workers) {
  IngestResult result;
  result.manifest = list_files(root, classes);
  auto& records = result.manifest.records;
  result.images.resize(records.size());
  std::vector<std::vector<std::string>> warnings(records.size());

  parallel_for(records.size(), workers, [&](std::size_t i) {
    preprocess::Outcome outcome = preprocess::run_file(root / records[i].path);
    records[i].accepted = outcome.accepted();
    records[i].rejection = outcome.rejection;
    result.images[i] = outcome.image;
    warnings[i] = std::move(outcome.warnings);
  });

  for (std::size_t i = 0; i < records.size(); ++i) {
    for (auto& w : warnings[i]) result.warnings.push_back(records[i].path + ": " + w);
  }
  result.manifest.recount();
  return result;
}

Manifest dedup(Manifest manifest, std::span<const std::optional<preprocess::GrayImage64>> images) {
  if (images.size() != manifest.records.size()) {
    throw Error(Errc::ShapeMismatch, "dedup needs one image slot per manifest record");
  }
  std::unordered_map<std::string_view, std::size_t> first_seen;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    Record& r = manifest.records[i];
    if (!r.accepted || r.duplicate_of) continue;
    if (!images[i]) throw Error(Errc::InvalidInput, "accepted record " + r.path + " has no pixel vector");
    const auto& px = images[i]->pixels;
    const std::string_view key(reinterpret_cast<const char*>(px.data()), px.size());
    auto [it, inserted] = first_seen.emplace(key, i);
    if (!inserted) r.duplicate_of = it->second;
  }
  manifest.recount();
  return manifest;
}

IngestResult ingest(const fs::path& root, std::size_t workers) {
  IngestResult result = build_manifest(root, scan_classes(root), workers);
  result.manifest = dedup(std::move(result.manifest), result.images);
  return result;
}

std::string manifest_to_jsonl(const Manifest& m) {
  std::ostringstream out;
  json header;
  header["type"] = "header";
  header["K"] = m.classes.size();
  header["classes"] = m.classes.names;
  header["N0"] = m.raw_total;
  header["N1"] = m.clean_total;
  header["raw_counts"] = m.raw_counts;
  header["clean_counts"] = m.clean_counts;
  out << header.dump() << '\n';
  for (const Record& r : m.records) {
    json rec;
    rec["path"] = r.path;
    rec["class_id"] = r.class_id;
    rec["accepted"] = r.accepted;
    rec["rejection"] = r.rejection ? json(preprocess::to_string(*r.rejection)) : json(nullptr);
    rec["duplicate_of"] = r.duplicate_of ? json(*r.duplicate_of) : json(nullptr);
    out << rec.dump() << '\n';
  }
  return out.str();
}

Manifest manifest_from_jsonl(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("type", "") != "header") throw Error(Errc::InvalidInput, "manifest must start with a header line");
        m.classes.names = j.at("classes").get<std::vector<std::string>>();
        have_header = true;
        continue;
      }
      Record r;
      r.path = j.at("path").get<std::string>();
      r.class_id = j.at("class_id").get<int>();
      r.accepted = j.at("accepted").get<bool>();
      if (!j.at("rejection").is_null()) {
        r.rejection = preprocess::rejection_from_string(j.at("rejection").get<std::string>());
        if (!r.rejection) throw Error(Errc::InvalidInput, "unknown rejection reason on line " + std::to_string(line_no));
      }
      if (!j.at("duplicate_of").is_null()) r.duplicate_of = j.at("duplicate_of").get<std::size_t>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidInput, "malformed manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error(Errc::InvalidInput, "manifest is empty");
  m.recount();
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  const std::string text = manifest_to_jsonl(m);
  io::write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Manifest read_manifest(const fs::path& path) {
  const auto bytes = io::read_bytes(path);
  return manifest_from_jsonl(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::size_t> FoldAssignment::members(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) out.push_back(i);
  }
  return out;
}

FoldAssignment stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidConfig, "fold count must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.fold.assign(labels.size(), 0);
  for (auto& [label, members] : by_class) {
    if (members.size() < k) {
      throw Error(Errc::StratificationImpossible, "class " + std::to_string(label) + " has " +
                                                      std::to_string(members.size()) + " samples, fewer than " +
                                                      std::to_string(k) + " folds");
    }
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    rng.shuffle(members.begin(), members.end());
    for (std::size_t p = 0; p < members.size(); ++p) out.fold[members[p]] = p % k;
  }
  return out;
}

std::vector<std::size_t> oversample(std::span<const std::size_t> train_indices, std::span<const int> labels,
                                    std::uint64_t seed) {
  if (train_indices.empty()) throw Error(Errc::EmptyTrainingSet, "oversample needs a nonempty training set");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t idx : train_indices) {
    if (idx >= labels.size()) throw Error(Errc::InvalidInput, "training index out of range");
    by_class[labels[idx]].push_back(idx);
  }
  std::size_t largest = 0;
  for (const auto& [label, members] : by_class) largest = std::max(largest, members.size());

  std::vector<std::size_t> out(train_indices.begin(), train_indices.end());
  out.reserve(largest * by_class.size());
  for (const auto& [label, members] : by_class) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    for (std::size_t n = members.size(); n < largest; ++n) out.push_back(members[rng.below(members.size())]);
  }
  return out;
}

std::vector<double> class_weights(std::span<const int> train_labels, std::size_t num_classes) {
  if (num_classes == 0) throw Error(Errc::InvalidConfig, "class count must be >= 1");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : train_labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw Error(Errc::InvalidLabel, "label outside 0..K-1");
    ++counts[static_cast<std::size_t>(y)];
  }
  std::vector<double> weights(num_classes);
  const auto total = static_cast<double>(train_labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw Error(Errc::MissingClass, "class " + std::to_string(c) + " absent from training labels");
    weights[c] = total / (static_cast<double>(num_classes) * static_cast<double>(counts[c]));
  }
  return weights;
}

}  // namespace tnfeat::dataset
