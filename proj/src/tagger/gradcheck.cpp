#include <algorithm>
#include <cmath>
#include <numeric>

#include "io.hpp"
#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

namespace {

const char* kModule = "tagger";
constexpr size_t kMaxDraws = 50;  // per requested coordinate

struct Checker {
  const Differentiable& f;
  const GradCheckOptions& opt;
  std::vector<double> x;
  std::vector<double> analytic;
  GradCheckResult result;

  Checker(const Differentiable& fn, std::span<const double> x0, const GradCheckOptions& o)
      : f(fn), opt(o), x(x0.begin(), x0.end()), analytic(x0.size()) {
    f.gradient(x, analytic);
  }

  // False when the coordinate straddles a kink.
  bool check(size_t i) {
    const double orig = x[i];
    x[i] = orig + opt.step;
    double plus = f.value(x);
    uint64_t piece_plus = f.piece(x);
    x[i] = orig - opt.step;
    double minus = f.value(x);
    uint64_t piece_minus = f.piece(x);
    x[i] = orig;
    if (piece_plus != piece_minus) {
      ++result.skipped;
      return false;
    }
    double numeric = (plus - minus) / (2.0 * opt.step);
    double a = analytic[i];
    double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    double rel = std::abs(a - numeric) / denom;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
    return true;
  }

  // Checks up to `want` distinct coordinates drawn from [first, first + len).
  void sample_range(size_t first, size_t len, size_t want, seglens::detail::Rng& rng) {
    std::vector<size_t> pool(len);
    std::iota(pool.begin(), pool.end(), first);
    rng.shuffle(pool);
    size_t done = 0;
    for (size_t k = 0; k < pool.size() && done < want; ++k) {
      if (check(pool[k])) ++done;
      if (k + 1 >= want * kMaxDraws) break;
    }
  }
};

void validate(const GradCheckOptions& o) {
  if (!(o.step > 0.0)) throw Error(ErrorKind::kArgument, kModule, "finite-difference step must be positive");
  if (o.coordinates == 0) throw Error(ErrorKind::kArgument, kModule, "need at least one coordinate");
  if (!(o.floor > 0.0)) throw Error(ErrorKind::kArgument, kModule, "relative-error floor must be positive");
}

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  return h;
}

class TaggerObjective : public Differentiable {
 public:
  TaggerObjective(const ModelParams& shape, std::span<const TaggerInput> batch,
                  const TaggerConfig& config)
      : shape_(shape), batch_(batch), config_(config) {}

  size_t size() const override { return shape_.parameter_count(); }

  double value(std::span<const double> x) const override {
    return batch_loss(load(x), batch_, config_, nullptr);
  }

  void gradient(std::span<const double> x, std::span<double> out) const override {
    ModelParams p = load(x);
    ModelParams g = p.zeros_like();
    batch_loss(p, batch_, config_, &g);
    auto flat = flatten(g);
    std::copy(flat.begin(), flat.end(), out.begin());
  }

  // Hash of every cummax argmax pattern over the batch.
  uint64_t piece(std::span<const double> x) const override {
    ModelParams p = load(x);
    uint64_t h = 0;
    for (const auto& in : batch_) {
      for (const auto& st : pfn_encode(in.features, p).steps) {
        for (auto a : st.entity_argmax) h = mix(h, a);
        for (auto a : st.relation_argmax) h = mix(h, a + 0x10000ULL);
      }
    }
    return h;
  }

 private:
  ModelParams load(std::span<const double> x) const {
    ModelParams p = shape_;
    unflatten(x, p);
    return p;
  }

  const ModelParams& shape_;
  std::span<const TaggerInput> batch_;
  const TaggerConfig& config_;
};

}  // namespace

GradCheckResult grad_check(const Differentiable& f, std::span<const double> x,
                           const GradCheckOptions& options) {
  validate(options);
  if (x.size() != f.size()) throw Error(ErrorKind::kArgument, kModule, "point size does not match function");
  Checker c(f, x, options);
  seglens::detail::Rng rng(options.seed);
  c.sample_range(0, x.size(), std::min(options.coordinates, x.size()), rng);
  return c.result;
}

GradCheckResult grad_check(const ModelParams& params, std::span<const TaggerInput> batch,
                           const TaggerConfig& config, const GradCheckOptions& options) {
  validate(options);
  if (batch.empty()) throw Error(ErrorKind::kArgument, kModule, "grad check needs a non-empty batch");
  TaggerObjective f(params, batch, config);
  auto x = flatten(params);
  Checker c(f, x, options);
  seglens::detail::Rng rng(options.seed);

  // Even quota per block so small bias blocks are always covered, then top
  // up from the whole vector when small blocks could not fill their share.
  const auto& blocks = params.blocks();
  const size_t quota = (options.coordinates + blocks.size() - 1) / blocks.size();
  size_t offset = 0;
  for (const auto& b : blocks) {
    c.sample_range(offset, b.values.size(), std::min(quota, b.values.size()), rng);
    offset += b.values.size();
  }
  if (c.result.checked < options.coordinates && c.result.checked < x.size()) {
    c.sample_range(0, x.size(), options.coordinates - c.result.checked, rng);
  }
  return c.result;
}

}  // namespace seglens::tagger
