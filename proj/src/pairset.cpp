#include "typegan/pairset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "typegan/errors.hpp"
#include "typegan/rng.hpp"

namespace typegan {

namespace {

const CorpusRow& corpus_row(const CorpusManifest& corpus, char32_t cp) {
  const CorpusRow* row = corpus.find(cp);
  if (!row) throw Error(ErrorKind::InsufficientCorpus, codepoint_label(cp) + " is not in the corpus");
  return *row;
}

PairRecord make_record(const CorpusManifest& corpus, char32_t src, char32_t tgt) {
  return {src, tgt, (corpus.directory() / corpus_row(corpus, src).src).lexically_normal(),
          (corpus.directory() / corpus_row(corpus, tgt).tgt).lexically_normal()};
}

std::string split_name(Split s) { return s == Split::Train ? "train" : "test"; }

}  // namespace

std::string to_string(PairKind kind) {
  switch (kind) {
    case PairKind::Strong: return "strong";
    case PairKind::Soft: return "soft";
    case PairKind::Random: return "random";
  }
  return "strong";
}

PairKind parse_pair_kind(const std::string& text) {
  if (text == "strong") return PairKind::Strong;
  if (text == "soft") return PairKind::Soft;
  if (text == "random") return PairKind::Random;
  throw Error(ErrorKind::InvalidConfig, "unknown pair policy '" + text + "' (expected strong|soft|random)");
}

void PairPolicy::validate() const {
  if (!(overlap_ratio >= 0.0 && overlap_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "overlap ratio must lie in [0, 1]");
  }
}

double PairPolicy::nominal_overlap(std::size_t n) const {
  if (kind != PairKind::Random) return 1.0;
  if (n == 0) return 0.0;
  return static_cast<double>(round_half_even(overlap_ratio * static_cast<double>(n))) / static_cast<double>(n);
}

std::int64_t round_half_even(double x) {
  const double f = std::floor(x);
  const double diff = x - f;
  auto r = static_cast<std::int64_t>(f);
  if (diff > 0.5 || (diff == 0.5 && (r % 2 != 0))) ++r;
  return r;
}

std::pair<std::vector<char32_t>, std::vector<char32_t>> split_corpus(const CorpusManifest& corpus, std::size_t n_train,
                                                                      std::size_t n_test, std::uint64_t seed) {
  std::vector<char32_t> cps = corpus.codepoints();
  if (n_train + n_test > cps.size()) {
    throw Error(ErrorKind::InsufficientCorpus, "split of " + std::to_string(n_train) + "+" + std::to_string(n_test) +
                                                   " exceeds corpus of " + std::to_string(cps.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span<char32_t>(cps));
  std::vector<char32_t> train(cps.begin(), cps.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<char32_t> test(cps.begin() + static_cast<std::ptrdiff_t>(n_train),
                             cps.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

PairManifest build_pairs(const std::vector<char32_t>& train_cps, const PairPolicy& policy, const CorpusManifest& corpus,
                         const std::set<char32_t>& exclude, Split split) {
  policy.validate();
  const std::size_t n = train_cps.size();
  {
    std::unordered_set<char32_t> seen;
    for (char32_t cp : train_cps) {
      corpus_row(corpus, cp);
      if (!seen.insert(cp).second) throw Error(ErrorKind::InvalidConfig, "duplicate codepoint " + codepoint_label(cp));
    }
  }

  PairManifest m;
  m.policy = policy;
  m.split = split;
  Rng rng(policy.seed);
  std::vector<char32_t> targets;

  switch (policy.kind) {
    case PairKind::Strong:
      targets = train_cps;
      break;
    case PairKind::Soft:
      targets = train_cps;
      if (n > 1) {
        // The identity permutation would be a Strong manifest; draw again.
        do {
          rng.shuffle(std::span<char32_t>(targets));
        } while (targets == train_cps);
      }
      break;
    case PairKind::Random: {
      const auto k = static_cast<std::size_t>(round_half_even(policy.overlap_ratio * static_cast<double>(n)));
      std::vector<char32_t> sources = train_cps;
      rng.shuffle(std::span<char32_t>(sources));
      targets.assign(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(k));

      const std::set<char32_t> in_train(train_cps.begin(), train_cps.end());
      std::vector<char32_t> outside;
      for (const auto& row : corpus.rows) {
        if (!in_train.contains(row.codepoint) && !exclude.contains(row.codepoint)) outside.push_back(row.codepoint);
      }
      if (outside.size() < n - k) {
        throw Error(ErrorKind::InsufficientCorpus,
                    "random policy with overlap " + std::to_string(policy.overlap_ratio) + " over " +
                        std::to_string(n) + " pairs needs " + std::to_string(n - k) +
                        " codepoints outside the training set, corpus has " + std::to_string(outside.size()));
      }
      rng.shuffle(std::span<char32_t>(outside));
      targets.insert(targets.end(), outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(n - k));
      rng.shuffle(std::span<char32_t>(targets));
      break;
    }
  }

  m.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) m.pairs.push_back(make_record(corpus, train_cps[i], targets[i]));
  return m;
}

double measure_overlap(const PairManifest& manifest) {
  if (manifest.pairs.empty()) throw Error(ErrorKind::EmptyManifest, "overlap of an empty manifest");
  std::unordered_set<char32_t> targets;
  for (const auto& p : manifest.pairs) targets.insert(p.tgt_cp);
  std::size_t hits = 0;
  for (const auto& p : manifest.pairs) hits += targets.contains(p.src_cp) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(manifest.pairs.size());
}

void write_pair_manifest(const std::filesystem::path& path, const PairManifest& manifest) {
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  nlohmann::ordered_json header;
  header["policy"] = to_string(manifest.policy.kind);
  header["overlap"] = manifest.policy.kind == PairKind::Random ? manifest.policy.overlap_ratio : 1.0;
  header["seed"] = manifest.policy.seed;
  header["split"] = split_name(manifest.split);
  out << header.dump() << '\n';
  for (const auto& p : manifest.pairs) {
    nlohmann::ordered_json row;
    row["src_cp"] = codepoint_label(p.src_cp);
    row["tgt_cp"] = codepoint_label(p.tgt_cp);
    row["src"] = std::filesystem::absolute(p.src_path).lexically_relative(dir).generic_string();
    row["tgt"] = std::filesystem::absolute(p.tgt_path).lexically_relative(dir).generic_string();
    out << row.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

PairManifest read_pair_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  const auto dir = std::filesystem::absolute(path).parent_path();
  PairManifest m;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!header_seen) {
        m.policy.kind = parse_pair_kind(j.at("policy").get<std::string>());
        m.policy.overlap_ratio = j.at("overlap").get<double>();
        m.policy.seed = j.at("seed").get<std::uint64_t>();
        m.split = j.value("split", std::string("train")) == "test" ? Split::Test : Split::Train;
        header_seen = true;
        continue;
      }
      m.pairs.push_back({parse_codepoint_label(j.at("src_cp").get<std::string>()),
                         parse_codepoint_label(j.at("tgt_cp").get<std::string>()),
                         (dir / j.at("src").get<std::string>()).lexically_normal(),
                         (dir / j.at("tgt").get<std::string>()).lexically_normal()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header_seen) throw Error(ErrorKind::InvalidConfig, path.string() + ": missing policy header row");
  return m;
}

}  // namespace typegan
