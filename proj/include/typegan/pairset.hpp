#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "typegan/glyphrender.hpp"

namespace typegan {

enum class PairKind { Strong, Soft, Random };

std::string to_string(PairKind kind);
PairKind parse_pair_kind(const std::string& text);

struct PairPolicy {
  PairKind kind = PairKind::Strong;
  double overlap_ratio = 1.0;  // used only by Random
  std::uint64_t seed = 0;

  void validate() const;
  /// Fraction of sources expected among targets for a manifest of n pairs.
  double nominal_overlap(std::size_t n) const;
};

enum class Split { Train, Test };

struct PairRecord {
  char32_t src_cp = 0;
  char32_t tgt_cp = 0;
  std::filesystem::path src_path;
  std::filesystem::path tgt_path;
};

struct PairManifest {
  std::vector<PairRecord> pairs;
  PairPolicy policy;
  Split split = Split::Train;

  std::size_t size() const { return pairs.size(); }
  bool has_ground_truth() const { return policy.kind == PairKind::Strong; }
};

/// round(x) with ties to even.
std::int64_t round_half_even(double x);

/// Seeded disjoint split of the corpus codepoints; each part returned sorted.
std::pair<std::vector<char32_t>, std::vector<char32_t>> split_corpus(const CorpusManifest& corpus, std::size_t n_train,
                                                                      std::size_t n_test, std::uint64_t seed);

/// Builds a manifest over train_cps under `policy`. Random-policy targets that
/// must not overlap are drawn from corpus codepoints outside train_cps and
/// outside `exclude` (e.g. the test split).
PairManifest build_pairs(const std::vector<char32_t>& train_cps, const PairPolicy& policy, const CorpusManifest& corpus,
                         const std::set<char32_t>& exclude = {}, Split split = Split::Train);

/// |{i : src_i appears among the targets}| / N. Throws EmptyManifest.
double measure_overlap(const PairManifest& manifest);

/// JSON-lines: header {"policy","overlap","seed","split"} then one
/// {"src_cp","tgt_cp","src","tgt"} row per pair; paths relative to the file.
void write_pair_manifest(const std::filesystem::path& path, const PairManifest& manifest);
PairManifest read_pair_manifest(const std::filesystem::path& path);

}  // namespace typegan
