#pragma once

// Internal layout of the tagger parameters and the forward/backward passes.

#include <cstddef>

#include "seglens/tagger.hpp"

namespace seglens::tagger::detail {

enum Block : size_t {
  kCandW,
  kCandB,
  kEntityGateW,
  kEntityGateB,
  kRelationGateW,
  kRelationGateB,
  kMemoryW,
  kMemoryB,
  kNerStartW,
  kNerEndW,
  kNerHiddenB,
  kNerOutW,
  kNerOutB,
  kReHeadW,
  kReTailW,
  kReHiddenB,
  kReOutW,
  kReOutB,
  kBlockCount,
};

extern const char* const kBlockNames[kBlockCount];

// Gradients of the loss with respect to the encoder outputs.
struct FeatureGrads {
  DMatrix entity;
  DMatrix relation;
};

// Backpropagates feature gradients through the encoder into `grads`.
void pfn_backward(const DMatrix& features, const ModelParams& params,
                  const FeatureGrads& dfeat, ModelParams& grads);

// Loss of the NER unit over all span cells; accumulates into dfeatures and
// grads when they are non-null.
double ner_loss(const DMatrix& entity_features, const ModelParams& params,
                const TaggerInput& input, const TaggerConfig& config,
                DMatrix* dfeatures, ModelParams* grads);

double re_loss(const DMatrix& relation_features, const ModelParams& params,
               const TaggerInput& input, const TaggerConfig& config,
               DMatrix* dfeatures, ModelParams* grads);

}  // namespace seglens::tagger::detail
