#include <cmath>
#include <set>
#include <tuple>

#include "model.hpp"
#include "seglens/error.hpp"

namespace seglens::tagger {

using namespace detail;

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Blocks of one scoring unit: left/right projections, hidden bias, output.
struct UnitBlocks {
  size_t left, right, hidden_bias, out_w, out_b;
};

constexpr UnitBlocks kNer{kNerStartW, kNerEndW, kNerHiddenB, kNerOutW, kNerOutB};
constexpr UnitBlocks kRe{kReHeadW, kReTailW, kReHiddenB, kReOutW, kReOutB};

// Row i of result = W f_i for every position.
DMatrix project(const ParamBlock& w, const DMatrix& f) {
  DMatrix out(f.rows, w.rows);
  for (size_t i = 0; i < f.rows; ++i) {
    auto x = f.row(i);
    for (size_t r = 0; r < w.rows; ++r) {
      const double* row = w.values.data() + r * w.cols;
      double s = 0.0;
      for (size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
      out(i, r) = s;
    }
  }
  return out;
}

struct Cell {
  size_t left, right;
};

std::vector<Cell> span_cells(size_t positions, size_t max_width) {
  std::vector<Cell> cells;
  for (size_t i = 0; i < positions; ++i) {
    for (size_t j = i; j < positions && j - i < max_width; ++j) cells.push_back({i, j});
  }
  return cells;
}

std::vector<Cell> pair_cells(size_t positions) {
  std::vector<Cell> cells;
  cells.reserve(positions * positions);
  for (size_t i = 0; i < positions; ++i) {
    for (size_t j = 0; j < positions; ++j) cells.push_back({i, j});
  }
  return cells;
}

// Logits of every cell and label: logits[c * labels + l].
struct UnitForward {
  DMatrix left, right;          // projections per position
  std::vector<double> hidden;   // cells x head
  std::vector<double> logits;   // cells x labels
};

UnitForward unit_forward(const DMatrix& f, const ModelParams& params, const UnitBlocks& u,
                         const std::vector<Cell>& cells) {
  const auto& b = params.blocks();
  const size_t head = params.head_size();
  const auto& out_w = b[u.out_w];
  const size_t labels = out_w.rows;
  UnitForward fw;
  fw.left = project(b[u.left], f);
  fw.right = project(b[u.right], f);
  fw.hidden.resize(cells.size() * head);
  fw.logits.resize(cells.size() * labels);
  for (size_t c = 0; c < cells.size(); ++c) {
    double* hid = fw.hidden.data() + c * head;
    auto l = fw.left.row(cells[c].left);
    auto r = fw.right.row(cells[c].right);
    for (size_t k = 0; k < head; ++k) hid[k] = std::tanh(l[k] + r[k] + b[u.hidden_bias].values[k]);
    for (size_t lab = 0; lab < labels; ++lab) {
      const double* wrow = out_w.values.data() + lab * head;
      double s = b[u.out_b].values[lab];
      for (size_t k = 0; k < head; ++k) s += wrow[k] * hid[k];
      fw.logits[c * labels + lab] = s;
    }
  }
  return fw;
}

// Summed BCE. `positive` marks (cell, label) targets equal to 1.
double unit_loss(const DMatrix& f, const ModelParams& params, const UnitBlocks& u,
                 const std::vector<Cell>& cells, const std::set<std::tuple<size_t, size_t, size_t>>& positive,
                 double positive_weight, DMatrix* df, ModelParams* grads) {
  const auto& b = params.blocks();
  const size_t head = params.head_size();
  const size_t labels = b[u.out_w].rows;
  UnitForward fw = unit_forward(f, params, u, cells);

  double loss = 0.0;
  std::vector<double> dlogits(fw.logits.size());
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t lab = 0; lab < labels; ++lab) {
      double x = fw.logits[c * labels + lab];
      bool y = positive.contains({cells[c].left, cells[c].right, lab});
      if (y) {
        loss += positive_weight * softplus(-x);
        dlogits[c * labels + lab] = positive_weight * (sigmoid(x) - 1.0);
      } else {
        loss += softplus(x);
        dlogits[c * labels + lab] = sigmoid(x);
      }
    }
  }
  if (!grads) return loss;

  auto& g = grads->blocks();
  DMatrix dleft(f.rows, head), dright(f.rows, head);
  std::vector<double> dhid(head);
  for (size_t c = 0; c < cells.size(); ++c) {
    const double* hid = fw.hidden.data() + c * head;
    std::fill(dhid.begin(), dhid.end(), 0.0);
    for (size_t lab = 0; lab < labels; ++lab) {
      double dl = dlogits[c * labels + lab];
      g[u.out_b].values[lab] += dl;
      const double* wrow = b[u.out_w].values.data() + lab * head;
      double* gw = g[u.out_w].values.data() + lab * head;
      for (size_t k = 0; k < head; ++k) {
        gw[k] += dl * hid[k];
        dhid[k] += dl * wrow[k];
      }
    }
    auto dl = dleft.row(cells[c].left);
    auto dr = dright.row(cells[c].right);
    for (size_t k = 0; k < head; ++k) {
      double da = dhid[k] * (1.0 - hid[k] * hid[k]);
      g[u.hidden_bias].values[k] += da;
      dl[k] += da;
      dr[k] += da;
    }
  }
  // Back through the per-position projections.
  for (auto [proj, dproj] : {std::pair{u.left, &dleft}, std::pair{u.right, &dright}}) {
    const auto& w = b[proj];
    auto& gw = g[proj];
    for (size_t i = 0; i < f.rows; ++i) {
      auto x = f.row(i);
      auto dy = dproj->row(i);
      auto dx = df ? df->row(i) : std::span<double>();
      for (size_t r = 0; r < w.rows; ++r) {
        if (dy[r] == 0.0) continue;
        const double* row = w.values.data() + r * w.cols;
        double* grow = gw.values.data() + r * w.cols;
        for (size_t c = 0; c < w.cols; ++c) {
          grow[c] += dy[r] * x[c];
          if (df) dx[c] += dy[r] * row[c];
        }
      }
    }
  }
  return loss;
}

}  // namespace

std::vector<SpanCell> score_spans(const DMatrix& entity_features, const ModelParams& params,
                                  size_t max_width) {
  auto cells = span_cells(entity_features.rows, max_width);
  auto fw = unit_forward(entity_features, params, kNer, cells);
  std::vector<SpanCell> out;
  out.reserve(cells.size() * kEntityLabelCount);
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t lab = 0; lab < kEntityLabelCount; ++lab) {
      out.push_back({cells[c].left, cells[c].right, lab,
                     sigmoid(fw.logits[c * kEntityLabelCount + lab])});
    }
  }
  return out;
}

std::vector<PairCell> score_pairs(const DMatrix& relation_features, const ModelParams& params) {
  auto cells = pair_cells(relation_features.rows);
  auto fw = unit_forward(relation_features, params, kRe, cells);
  std::vector<PairCell> out;
  out.reserve(cells.size() * kRelationLabelCount);
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t lab = 0; lab < kRelationLabelCount; ++lab) {
      out.push_back({cells[c].left, cells[c].right, lab,
                     sigmoid(fw.logits[c * kRelationLabelCount + lab])});
    }
  }
  return out;
}

namespace detail {

double ner_loss(const DMatrix& entity_features, const ModelParams& params,
                const TaggerInput& input, const TaggerConfig& config, DMatrix* dfeatures,
                ModelParams* grads) {
  std::set<std::tuple<size_t, size_t, size_t>> positive;
  for (const auto& s : input.gold_spans) {
    if (s.end - s.start < config.max_span_width) positive.insert({s.start, s.end, s.label});
  }
  return unit_loss(entity_features, params, kNer, span_cells(entity_features.rows, config.max_span_width),
                   positive, config.positive_weight, dfeatures, grads);
}

double re_loss(const DMatrix& relation_features, const ModelParams& params,
               const TaggerInput& input, const TaggerConfig& config, DMatrix* dfeatures,
               ModelParams* grads) {
  std::set<std::tuple<size_t, size_t, size_t>> positive;
  for (const auto& p : input.gold_pairs) positive.insert({p.head, p.tail, p.label});
  return unit_loss(relation_features, params, kRe, pair_cells(relation_features.rows), positive,
                   config.positive_weight, dfeatures, grads);
}

}  // namespace detail

}  // namespace seglens::tagger
