#include "ncl/buffer.hpp"

#include "ncl/errors.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>

namespace ncl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(make_rng(seed, 0xB0FF)) {
  entries_.reserve(capacity);
}

void ReplayBuffer::insert(Sample item) {
  if (capacity_ == 0) {
    ++seen_;
    return;
  }
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(item));
  } else {
    std::uniform_int_distribution<std::uint64_t> slot(0, seen_);
    const std::uint64_t j = slot(rng_);
    if (j < capacity_) entries_[static_cast<std::size_t>(j)] = std::move(item);
  }
  ++seen_;
}

void ReplayBuffer::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write buffer dump " + path.string());
  const Eigen::Index dim = entries_.empty() ? 0 : entries_.front().x.size();
  out << "task,label";
  for (Eigen::Index c = 0; c < dim; ++c) out << ",x" << c;
  out << '\n' << std::setprecision(17);
  for (const auto& e : entries_) {
    out << e.task << ',' << e.label;
    for (Eigen::Index c = 0; c < e.x.size(); ++c) out << ',' << e.x(c);
    out << '\n';
  }
}

std::vector<DrawnSample> sample_batch(const ReplayBuffer& buf, std::span<const Sample> current_pool,
                                      int batch_size, Rng& rng) {
  if (batch_size <= 0) throw ConfigError("sample_batch: batch size must be positive");
  if (current_pool.empty()) throw ProtocolError("sample_batch: current pool is empty");

  const std::size_t pool = current_pool.size();
  const std::size_t total = pool + buf.size();
  const auto n = static_cast<std::size_t>(batch_size);
  auto at = [&](std::size_t idx) {
    return idx < pool ? DrawnSample{&current_pool[idx], false} : DrawnSample{&buf.entries()[idx - pool], true};
  };

  std::vector<DrawnSample> out;
  out.reserve(n);
  if (n <= total) {
    // Partial Fisher-Yates over the union index range.
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(at(idx[i]));
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(at(pick(rng)));
  }
  return out;
}

}  // namespace ncl
