#include <numeric>

#include "typegan/errors.hpp"
#include "typegan/glyphrender.hpp"
#include "typegan/trainkit.hpp"

namespace typegan {

namespace {

Tensor gather(const Tensor& all, std::span<const std::int64_t> idx) {
  std::vector<Tensor> parts;
  parts.reserve(idx.size());
  for (auto i : idx) parts.push_back(all.slice_batch(i, 1));
  return concat_batch(parts);
}

}  // namespace

PairDataset PairDataset::load(const PairManifest& manifest, int canvas) {
  if (manifest.pairs.empty()) throw Error(ErrorKind::EmptyManifest, "no pairs to load");
  std::vector<Tensor> src, tgt;
  PairDataset d;
  for (const auto& p : manifest.pairs) {
    for (auto [path, list] : {std::pair{&p.src_path, &src}, {&p.tgt_path, &tgt}}) {
      Tensor img = read_png(*path);
      if (img.dim(0) != canvas || img.dim(1) != canvas) {
        throw Error(ErrorKind::ShapeMismatch, path->string() + " is " + shape_to_string(img.shape()) +
                                                  ", model canvas is " + std::to_string(canvas));
      }
      list->push_back(std::move(img));
    }
    d.src_cps.push_back(p.src_cp);
    d.tgt_cps.push_back(p.tgt_cp);
  }
  d.src = stack(src);
  d.tgt = stack(tgt);
  return d;
}

Tensor PairDataset::gather_src(std::span<const std::int64_t> idx) const { return gather(src, idx); }
Tensor PairDataset::gather_tgt(std::span<const std::int64_t> idx) const { return gather(tgt, idx); }

std::int64_t steps_per_epoch(std::int64_t n, int batch_size) {
  if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  return (n + batch_size - 1) / batch_size;
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x100000000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::int64_t>(order));
  return order;
}

}  // namespace typegan
