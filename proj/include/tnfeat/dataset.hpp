#pragma once

#include "tnfeat/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tnfeat::dataset {

/// Class folders in lexicographic order; class id = position.
struct ClassMap {
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
};

struct Record {
  std::string path;  // relative to the dataset root, generic separators
  int class_id = 0;
  bool accepted = false;
  std::optional<preprocess::RejectionReason> rejection;
  std::optional<std::size_t> duplicate_of;

  /// Accepted and not a duplicate: part of the clean set.
  bool clean() const noexcept { return accepted && !duplicate_of; }
  friend bool operator==(const Record&, const Record&) = default;
};

struct Manifest {
  ClassMap classes;
  std::vector<Record> records;
  std::size_t raw_total = 0;                 // N0
  std::size_t clean_total = 0;               // N1
  std::vector<std::size_t> raw_counts;       // per class, before cleaning
  std::vector<std::size_t> clean_counts;     // per class, accepted and distinct

  /// Recomputes the counts from the records.
  void recount();
  /// Record indices of the clean set, in manifest order.
  std::vector<std::size_t> clean_indices() const;
  std::vector<int> clean_labels() const;
};

/// Throws NoClassesFound when root has no subdirectory, IoError when root
/// cannot be listed.
ClassMap scan_classes(const std::filesystem::path& root);

/// Lists every regular file under each class folder (recursively, sorted),
/// without decoding.
Manifest list_files(const std::filesystem::path& root, const ClassMap& classes);

struct IngestResult {
  Manifest manifest;
  /// One entry per record; set for accepted records.
  std::vector<std::optional<preprocess::GrayImage64>> images;
  std::vector<std::string> warnings;
};

/// list_files, then preprocess each file (on up to `workers` threads). The
/// record order does not depend on the schedule. Duplicates are not yet
/// marked.
IngestResult build_manifest(const std::filesystem::path& root, const ClassMap& classes, std::size_t workers = 1);

/// Marks every accepted record whose 8-bit pixel vector equals that of an
/// earlier accepted record; the lowest index survives. `images` holds one
/// entry per record (accepted records must have a value).
Manifest dedup(Manifest manifest, std::span<const std::optional<preprocess::GrayImage64>> images);

/// scan_classes + build_manifest + dedup.
IngestResult ingest(const std::filesystem::path& root, std::size_t workers = 1);

/// Line-delimited JSON: a header object, then one object per record.
std::string manifest_to_jsonl(const Manifest& m);
Manifest manifest_from_jsonl(std::string_view text);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold;  // per sample

  std::vector<std::size_t> members(std::size_t f) const;
  std::vector<std::size_t> complement(std::size_t f) const;
};

/// Within each class the samples are shuffled by a seeded stream and dealt
/// round-robin to folds. Throws InvalidConfig for k < 2 and
/// StratificationImpossible when a present class has fewer than k samples.
FoldAssignment stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Random oversampling within a training index set: every class is topped
/// up to the largest class count by drawing with replacement from that
/// class's own training indices. The input indices come first, unchanged.
std::vector<std::size_t> oversample(std::span<const std::size_t> train_indices, std::span<const int> labels,
                                    std::uint64_t seed);

/// w_k = N / (K * n_k) on the given (pre-oversampling) labels. Throws
/// MissingClass when a class in 0..K-1 is absent.
std::vector<double> class_weights(std::span<const int> train_labels, std::size_t num_classes);

}  // namespace tnfeat::dataset
