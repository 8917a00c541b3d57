#include <cmath>

#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

using namespace detail;

namespace {

// y = W x + b for a (rows x cols) block.
void affine(const ParamBlock& w, const ParamBlock& b, std::span<const double> x,
            std::span<double> y) {
  for (size_t r = 0; r < w.rows; ++r) {
    const double* row = w.values.data() + r * w.cols;
    double s = b.values[r];
    for (size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

// dW += dy x^T, db += dy, dx += W^T dy.
void affine_backward(const ParamBlock& w, std::span<const double> x, std::span<const double> dy,
                     ParamBlock& dw, ParamBlock& db, std::span<double> dx) {
  for (size_t r = 0; r < w.rows; ++r) {
    double g = dy[r];
    if (g == 0.0) continue;
    db.values[r] += g;
    const double* row = w.values.data() + r * w.cols;
    double* drow = dw.values.data() + r * w.cols;
    for (size_t c = 0; c < w.cols; ++c) {
      drow[c] += g * x[c];
      dx[c] += g * row[c];
    }
  }
}

void softmax(std::span<const double> s, std::span<double> p) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double z = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(s[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
}

void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> ds) {
  double inner = 0.0;
  for (size_t i = 0; i < p.size(); ++i) inner += dp[i] * p[i];
  for (size_t i = 0; i < p.size(); ++i) ds[i] = p[i] * (dp[i] - inner);
}

// Running maximum; ties keep the earlier index.
void cummax(std::span<const double> p, std::span<double> y, std::vector<uint16_t>& arg) {
  arg.resize(p.size());
  size_t best = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
    y[i] = p[best];
    arg[i] = static_cast<uint16_t>(best);
  }
}

// Everything the backward pass needs from one step, beyond PartitionStep.
struct StepCache {
  std::vector<double> z, cand, pe, pr, e, r, base;
};

struct Forward {
  EncoderOutput out;
  std::vector<StepCache> cache;
};

Forward run_forward(const DMatrix& features, const ModelParams& params) {
  if (features.cols != params.input_dim()) {
    throw Error(ErrorKind::kArgument, "tagger",
                "feature dimension " + std::to_string(features.cols) + " does not match model input " +
                    std::to_string(params.input_dim()));
  }
  if (features.rows == 0) throw Error(ErrorKind::kArgument, "tagger", "empty sentence");
  const auto& blocks = params.blocks();
  const size_t m = params.partition_size();
  const size_t d = params.input_dim();
  const size_t w = features.rows;

  Forward f;
  f.out.entity = DMatrix(w, 2 * m);
  f.out.relation = DMatrix(w, 2 * m);
  f.out.steps.resize(w);
  f.cache.resize(w);

  std::vector<double> h(m, 0.0), c(m, 0.0), scratch(m);
  for (size_t t = 0; t < w; ++t) {
    auto& st = f.out.steps[t];
    auto& k = f.cache[t];
    k.z.resize(d + m);
    std::copy(features.row(t).begin(), features.row(t).end(), k.z.begin());
    std::copy(h.begin(), h.end(), k.z.begin() + static_cast<long>(d));

    k.cand.resize(m);
    affine(blocks[kCandW], blocks[kCandB], k.z, k.cand);
    for (double& v : k.cand) v = std::tanh(v);

    k.pe.resize(m);
    k.e.resize(m);
    affine(blocks[kEntityGateW], blocks[kEntityGateB], k.z, scratch);
    softmax(scratch, k.pe);
    cummax(k.pe, k.e, st.entity_argmax);

    k.pr.resize(m);
    k.r.resize(m);
    affine(blocks[kRelationGateW], blocks[kRelationGateB], k.z, scratch);
    softmax(scratch, k.pr);
    cummax(k.pr, k.r, st.relation_argmax);
    for (double& v : k.r) v = 1.0 - v;

    st.entity_mask.resize(m);
    st.relation_mask.resize(m);
    st.shared_mask.resize(m);
    st.state.resize(3 * m);
    k.base.resize(m);
    for (size_t i = 0; i < m; ++i) {
      double shared = k.e[i] * k.r[i];
      st.shared_mask[i] = shared;
      st.entity_mask[i] = k.e[i] - shared;
      st.relation_mask[i] = k.r[i] - shared;
      k.base[i] = c[i] + k.cand[i];
      st.state[i] = st.entity_mask[i] * k.base[i];
      st.state[m + i] = st.relation_mask[i] * k.base[i];
      st.state[2 * m + i] = shared * k.base[i];
    }

    st.memory.resize(m);
    affine(blocks[kMemoryW], blocks[kMemoryB], st.state, st.memory);
    for (size_t i = 0; i < m; ++i) {
      c[i] = st.memory[i];
      h[i] = std::tanh(c[i]);
    }

    auto ent = f.out.entity.row(t);
    auto rel = f.out.relation.row(t);
    for (size_t i = 0; i < m; ++i) {
      ent[i] = std::tanh(st.state[i]);
      rel[i] = std::tanh(st.state[m + i]);
      double s = std::tanh(st.state[2 * m + i]);
      ent[m + i] = s;
      rel[m + i] = s;
    }
  }
  return f;
}

}  // namespace

EncoderOutput pfn_encode(const DMatrix& features, const ModelParams& params) {
  return run_forward(features, params).out;
}

namespace detail {

void pfn_backward(const DMatrix& features, const ModelParams& params,
                  const FeatureGrads& dfeat, ModelParams& grads) {
  Forward f = run_forward(features, params);
  const auto& blocks = params.blocks();
  auto& gb = grads.blocks();
  const size_t m = params.partition_size();
  const size_t d = params.input_dim();
  const size_t w = features.rows;

  std::vector<double> dh(m, 0.0), dc(m, 0.0);
  std::vector<double> dstate(3 * m), dmu_e(m), dmu_r(m), dmu_s(m);
  std::vector<double> de(m), dr(m), dpe(m), dpr(m), dse(m), dsr(m), dcand(m), dz(d + m);
  std::vector<double> dc_total(m);

  for (size_t t = w; t-- > 0;) {
    const auto& st = f.out.steps[t];
    const auto& k = f.cache[t];

    // c_t feeds h_t = tanh(c_t) and the next step's base.
    for (size_t i = 0; i < m; ++i) {
      double h = std::tanh(st.memory[i]);
      dc_total[i] = dc[i] + dh[i] * (1.0 - h * h);
    }
    std::fill(dstate.begin(), dstate.end(), 0.0);
    affine_backward(blocks[kMemoryW], st.state, dc_total, gb[kMemoryW], gb[kMemoryB], dstate);

    auto ent = f.out.entity.row(t);
    auto rel = f.out.relation.row(t);
    auto dent = dfeat.entity.row(t);
    auto drel = dfeat.relation.row(t);
    for (size_t i = 0; i < m; ++i) {
      dmu_e[i] = dstate[i] + dent[i] * (1.0 - ent[i] * ent[i]);
      dmu_r[i] = dstate[m + i] + drel[i] * (1.0 - rel[i] * rel[i]);
      double ds = ent[m + i];
      dmu_s[i] = dstate[2 * m + i] + (dent[m + i] + drel[m + i]) * (1.0 - ds * ds);
    }

    std::vector<double> dbase(m);
    for (size_t i = 0; i < m; ++i) {
      double dm_ent = dmu_e[i] * k.base[i];
      double dm_rel = dmu_r[i] * k.base[i];
      double dm_sh = dmu_s[i] * k.base[i];
      dbase[i] = dmu_e[i] * st.entity_mask[i] + dmu_r[i] * st.relation_mask[i] +
                 dmu_s[i] * st.shared_mask[i];
      // ent = e (1 - r), rel = r (1 - e), shared = e r
      de[i] = dm_ent * (1.0 - k.r[i]) - dm_rel * k.r[i] + dm_sh * k.r[i];
      dr[i] = -dm_ent * k.e[i] + dm_rel * (1.0 - k.e[i]) + dm_sh * k.e[i];
    }

    std::fill(dpe.begin(), dpe.end(), 0.0);
    std::fill(dpr.begin(), dpr.end(), 0.0);
    for (size_t i = 0; i < m; ++i) {
      dpe[st.entity_argmax[i]] += de[i];
      dpr[st.relation_argmax[i]] -= dr[i];  // r = 1 - cummax
    }
    softmax_backward(k.pe, dpe, dse);
    softmax_backward(k.pr, dpr, dsr);

    for (size_t i = 0; i < m; ++i) dcand[i] = dbase[i] * (1.0 - k.cand[i] * k.cand[i]);

    std::fill(dz.begin(), dz.end(), 0.0);
    affine_backward(blocks[kCandW], k.z, dcand, gb[kCandW], gb[kCandB], dz);
    affine_backward(blocks[kEntityGateW], k.z, dse, gb[kEntityGateW], gb[kEntityGateB], dz);
    affine_backward(blocks[kRelationGateW], k.z, dsr, gb[kRelationGateW], gb[kRelationGateB], dz);

    for (size_t i = 0; i < m; ++i) {
      dh[i] = dz[d + i];
      dc[i] = dbase[i];  // base = c_prev + cand
    }
  }
}

}  // namespace detail

}  // namespace seglens::tagger
