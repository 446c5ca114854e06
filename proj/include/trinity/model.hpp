#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trinity/backbone.hpp"
#include "trinity/config.hpp"
#include "trinity/tensor.hpp"

namespace trinity {

enum class QueryRole { SplitCs, SplitCa, Cst, Cat };

// A set of queries plus, for task roles, the output channel each query
// feeds. CST queries map to CS class ids, CAT queries to CA slot ids.
struct QuerySet {
  QueryRole role;
  Tensor embeddings;               // [n, D]
  std::vector<size_t> region_of;   // empty for split roles
};

struct ModelConfig {
  size_t num_cs_classes = 0;  // K
  size_t num_ca_slots = 0;    // M
  size_t n_split_cs = 4;
  size_t n_split_ca = 4;
  size_t queries_per_cs = 2;  // k_cs
  size_t queries_per_ca = 2;  // k_ca
  size_t feature_dim = 64;    // D
  size_t layers_split = 2;
  size_t layers_task = 2;
  size_t patch_size = 8;
  uint64_t seed = 0;

  void validate() const;
  // reads/writes the "model.*" keys of a run config; K and M always come
  // from the taxonomy, not the file
  static ModelConfig from_config(const KeyValues& kv, size_t num_cs, size_t num_slots);
  void to_config(KeyValues& kv) const;
};

struct ModelOutput {
  Tensor logits;            // [K+M, H, W]; CS channels first
  Tensor aux_split_logits;  // [n_split_cs + n_split_ca, Hf, Wf]
  Tensor updated_split_cs;  // [n_split_cs, D]
  Tensor updated_split_ca;  // [n_split_ca, D]
};

// The joint CS/CA segmentation head: a Split-Transformer whose two query
// sets partition the feature map, task transformers for each branch with
// the complementary branch's updated queries as context, per-channel query
// aggregation, and dot-product mask decoding.
class TrinityNet {
 public:
  explicit TrinityNet(ModelConfig cfg);

  ModelOutput forward(const Image& image) const;

  struct SplitResult {
    Tensor q_cs;        // [n_split_cs, D]
    Tensor q_ca;        // [n_split_ca, D]
    Tensor aux_logits;  // [n_split_cs + n_split_ca, Hf, Wf]
  };
  SplitResult split_forward(const FeatureMap& fm) const;

  // Runs the task transformer owning `own` with `context` prepended; only
  // the own-query outputs are returned.
  Tensor task_forward(const FeatureMap& fm, const QuerySet& own, const QuerySet& context) const;

  static Tensor aggregate_queries(const Tensor& q_out, const std::vector<size_t>& region_of,
                                  size_t n_channels);

  Tensor mask_head_cs(const Tensor& channel_emb, const FeatureMap& fm, size_t out_h,
                      size_t out_w) const;
  Tensor mask_head_ca(const Tensor& channel_emb, const FeatureMap& fm, size_t out_h,
                      size_t out_w) const;

  QuerySet cst_queries() const;
  QuerySet cat_queries() const;

  // Stable-order parameter registry shared with the optimizer/checkpoint.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  void load_parameters(const std::vector<std::pair<std::string, Tensor>>& params);
  void set_parameter(const std::string& name, const std::vector<double>& values);

  const ModelConfig& config() const { return cfg_; }
  const Backbone& backbone() const { return backbone_; }

 private:
  struct Attn {
    Tensor wq, wk, wv, wo;  // all [D, D]
  };
  struct Ffn {
    Tensor w1, b1, w2, b2;
  };
  struct Norm {
    Tensor gain, bias;
  };
  struct CrossLayer {
    Attn cross;
    Norm norm1;
    Ffn ffn;
    Norm norm2;
  };
  struct TaskLayer {
    Attn self_attn;
    Norm norm0;
    Attn cross;
    Norm norm1;
    Ffn ffn;
    Norm norm2;
  };
  struct MaskHead {
    Tensor w1, b1, w2, b2;
  };

  Tensor attend(const Attn& w, const Tensor& queries, const Tensor& keys) const;
  Tensor ffn_forward(const Ffn& f, const Tensor& x) const;
  Tensor task_stack(const std::vector<TaskLayer>& layers, const Tensor& x0,
                    const Tensor& flat_features) const;
  Tensor decode_masks(const MaskHead& head, const Tensor& channel_emb, const FeatureMap& fm,
                      size_t out_h, size_t out_w) const;
  void register_params();

  ModelConfig cfg_;
  Backbone backbone_;
  Tensor q_split_cs_, q_split_ca_, q_cst_, q_cat_;
  std::vector<CrossLayer> split_layers_;
  std::vector<TaskLayer> cst_layers_, cat_layers_;
  MaskHead head_cs_, head_ca_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace trinity
