#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "typegan/font.hpp"

namespace typegan::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return TYPEGAN_TEST_DATA_DIR; }
fs::path fixture(const std::string& name) { return data_dir() / name; }

ScratchDir::ScratchDir(const std::string& tag) {
  path_ = fs::path(TYPEGAN_TEST_SCRATCH_DIR) / tag;
  fs::remove_all(path_);
  fs::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::optional<fs::path> system_font(const std::string& file_name) {
  const std::vector<fs::path> roots = {"/usr/share/fonts/truetype/dejavu", "/usr/share/fonts/TTF",
                                       "/usr/share/fonts/dejavu", "/usr/local/share/fonts", "/Library/Fonts",
                                       "/System/Library/Fonts"};
  for (const auto& root : roots) {
    if (fs::exists(root / file_name)) return root / file_name;
  }
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator("/usr/share/fonts", ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->path().filename() == file_name) return it->path();
  }
  return std::nullopt;
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path render_pair_corpus(const fs::path& src_font, const fs::path& tgt_font, std::size_t n, int canvas,
                            std::uint64_t seed, const fs::path& out_dir) {
  const FontHandle a = open_font(src_font);
  const FontHandle b = open_font(tgt_font);
  const auto cps = sample_codepoints(shared_codepoints(a, b), n, seed);
  return render_corpus(a, b, cps, RenderConfig::for_canvas(canvas), out_dir);
}

GradCheckResult gradcheck(Var& leaf, const std::function<Var()>& f, std::span<const std::int64_t> indices, double h,
                          double floor) {
  leaf.set_requires_grad(true);
  leaf.zero_grad();
  backward(f());
  const Tensor analytic = leaf.grad();
  GradCheckResult r;
  NoGradGuard guard;
  for (std::int64_t i : indices) {
    double& x = leaf.mutable_value()[i];
    const double saved = x;
    x = saved + h;
    const double up = f().value()[0];
    x = saved - h;
    const double down = f().value()[0];
    x = saved;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic[i];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale >= floor) {
      r.worst_rel = std::max(r.worst_rel, std::abs(a - numeric) / scale);
    } else {
      r.worst_abs_small = std::max(r.worst_abs_small, std::abs(a - numeric));
      ++r.small;
    }
    ++r.probes;
  }
  return r;
}

std::vector<std::int64_t> probe_indices(std::int64_t n, std::size_t count, Rng& rng) {
  if (static_cast<std::int64_t>(count) >= n) {
    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  std::set<std::int64_t> picked;
  while (picked.size() < count) picked.insert(rng.uniform_int(0, n - 1));
  return {picked.begin(), picked.end()};
}

}  // namespace typegan::testing
