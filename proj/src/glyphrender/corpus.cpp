#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "typegan/errors.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/rng.hpp"

namespace typegan {

using ordered_json = nlohmann::ordered_json;

std::vector<char32_t> CorpusManifest::codepoints() const {
  std::vector<char32_t> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.codepoint);
  return out;
}

const CorpusRow* CorpusManifest::find(char32_t cp) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), cp,
                             [](const CorpusRow& r, char32_t c) { return r.codepoint < c; });
  return (it != rows.end() && it->codepoint == cp) ? &*it : nullptr;
}

std::filesystem::path render_corpus(const FontHandle& src, const FontHandle& tgt, std::vector<char32_t> codepoints,
                                    const RenderConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::sort(codepoints.begin(), codepoints.end());
  codepoints.erase(std::unique(codepoints.begin(), codepoints.end()), codepoints.end());

  std::string missing;
  for (char32_t cp : codepoints) {
    if (!src.maps(cp) || !tgt.maps(cp)) missing += (missing.empty() ? "" : ", ") + codepoint_label(cp);
  }
  if (!missing.empty()) throw Error(ErrorKind::MissingGlyph, "not in both fonts: " + missing);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  if (!codepoints.empty()) {
    std::filesystem::create_directories(out_dir / "src", ec);
    std::filesystem::create_directories(out_dir / "tgt", ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create image directories under " + out_dir.string());
  }

  const auto manifest_path = out_dir / kCorpusManifestName;
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + manifest_path.string());
  for (char32_t cp : codepoints) {
    const std::string name = codepoint_label(cp) + ".png";
    write_png(out_dir / "src" / name, rasterize(src, cp, cfg).pixels);
    write_png(out_dir / "tgt" / name, rasterize(tgt, cp, cfg).pixels);
    ordered_json row;
    row["cp"] = codepoint_label(cp);
    row["src"] = "src/" + name;
    row["tgt"] = "tgt/" + name;
    out << row.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + manifest_path.string());
  return manifest_path;
}

CorpusManifest read_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  CorpusManifest m;
  m.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      m.rows.push_back({parse_codepoint_label(j.at("cp").get<std::string>()), j.at("src").get<std::string>(),
                        j.at("tgt").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::sort(m.rows.begin(), m.rows.end(), [](const auto& a, const auto& b) { return a.codepoint < b.codepoint; });
  return m;
}

std::vector<char32_t> sample_codepoints(const std::vector<char32_t>& pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.size()) {
    throw Error(ErrorKind::InsufficientCorpus,
                "requested " + std::to_string(n) + " codepoints but only " + std::to_string(pool.size()) + " are shared");
  }
  std::vector<char32_t> items = pool;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(items.size()) - 1));
    std::swap(items[i], items[j]);
  }
  items.resize(n);
  std::sort(items.begin(), items.end());
  return items;
}

}  // namespace typegan
