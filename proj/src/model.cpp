#include "trinity/model.hpp"

#include <cmath>

#include "trinity/error.hpp"
#include "trinity/rng.hpp"

namespace trinity {

void ModelConfig::validate() const {
  if (num_cs_classes == 0) throw ConfigError("model: K must be >= 1");
  if (num_ca_slots == 0) throw ConfigError("model: M must be >= 1");
  if (n_split_cs == 0 || n_split_ca == 0 || queries_per_cs == 0 || queries_per_ca == 0) {
    throw ConfigError("model: query counts must be >= 1");
  }
  if (feature_dim == 0 || layers_split == 0 || layers_task == 0 || patch_size == 0) {
    throw ConfigError("model: dims and layer counts must be >= 1");
  }
}

ModelConfig ModelConfig::from_config(const KeyValues& kv, size_t num_cs, size_t num_slots) {
  ModelConfig cfg;
  cfg.num_cs_classes = num_cs;
  cfg.num_ca_slots = num_slots;
  cfg.n_split_cs = kv.get_u64("model.n_split_cs", 4);
  cfg.n_split_ca = kv.get_u64("model.n_split_ca", 4);
  cfg.queries_per_cs = kv.get_u64("model.queries_per_cs", 2);
  cfg.queries_per_ca = kv.get_u64("model.queries_per_ca", 2);
  cfg.feature_dim = kv.get_u64("model.feature_dim", 64);
  cfg.layers_split = kv.get_u64("model.layers_split", 2);
  cfg.layers_task = kv.get_u64("model.layers_task", 2);
  cfg.patch_size = kv.get_u64("model.patch_size", 8);
  cfg.seed = kv.get_u64("model.seed", 0);
  cfg.validate();
  return cfg;
}

void ModelConfig::to_config(KeyValues& kv) const {
  kv.set_int("model.n_split_cs", static_cast<int64_t>(n_split_cs));
  kv.set_int("model.n_split_ca", static_cast<int64_t>(n_split_ca));
  kv.set_int("model.queries_per_cs", static_cast<int64_t>(queries_per_cs));
  kv.set_int("model.queries_per_ca", static_cast<int64_t>(queries_per_ca));
  kv.set_int("model.feature_dim", static_cast<int64_t>(feature_dim));
  kv.set_int("model.layers_split", static_cast<int64_t>(layers_split));
  kv.set_int("model.layers_task", static_cast<int64_t>(layers_task));
  kv.set_int("model.patch_size", static_cast<int64_t>(patch_size));
  kv.set_int("model.seed", static_cast<int64_t>(seed));
}

namespace {

Tensor init_weight(const Shape& shape, Rng& rng, double stddev) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  std::vector<double> values(n);
  for (auto& v : values) v = rng.normal(0.0, stddev);
  return Tensor(shape, std::move(values), /*requires_grad=*/true);
}

}  // namespace

TrinityNet::TrinityNet(ModelConfig cfg)
    : cfg_(cfg),
      backbone_(BackboneConfig{cfg.patch_size, cfg.feature_dim, cfg.seed ^ 0x5eedbacc0fUL}) {
  cfg_.validate();
  const size_t d = cfg_.feature_dim;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(cfg_.seed);

  q_split_cs_ = init_weight({cfg_.n_split_cs, d}, rng, 0.5);
  q_split_ca_ = init_weight({cfg_.n_split_ca, d}, rng, 0.5);
  q_cst_ = init_weight({cfg_.num_cs_classes * cfg_.queries_per_cs, d}, rng, 0.5);
  q_cat_ = init_weight({cfg_.num_ca_slots * cfg_.queries_per_ca, d}, rng, 0.5);

  auto make_attn = [&]() {
    return Attn{init_weight({d, d}, rng, w_std), init_weight({d, d}, rng, w_std),
                init_weight({d, d}, rng, w_std), init_weight({d, d}, rng, w_std)};
  };
  auto make_ffn = [&]() {
    return Ffn{init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true),
               init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true)};
  };
  auto make_norm = [&]() { return Norm{Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)}; };

  for (size_t l = 0; l < cfg_.layers_split; ++l) {
    split_layers_.push_back(CrossLayer{make_attn(), make_norm(), make_ffn(), make_norm()});
  }
  for (size_t l = 0; l < cfg_.layers_task; ++l) {
    cst_layers_.push_back(
        TaskLayer{make_attn(), make_norm(), make_attn(), make_norm(), make_ffn(), make_norm()});
  }
  for (size_t l = 0; l < cfg_.layers_task; ++l) {
    cat_layers_.push_back(
        TaskLayer{make_attn(), make_norm(), make_attn(), make_norm(), make_ffn(), make_norm()});
  }
  head_cs_ = MaskHead{init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true),
                      init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true)};
  head_ca_ = MaskHead{init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true),
                      init_weight({d, d}, rng, w_std), Tensor::zeros({d}, true)};
  register_params();
}

void TrinityNet::register_params() {
  params_.clear();
  params_.emplace_back("query.split_cs", q_split_cs_);
  params_.emplace_back("query.split_ca", q_split_ca_);
  params_.emplace_back("query.cst", q_cst_);
  params_.emplace_back("query.cat", q_cat_);
  auto add_attn = [&](const std::string& prefix, const Attn& a) {
    params_.emplace_back(prefix + ".wq", a.wq);
    params_.emplace_back(prefix + ".wk", a.wk);
    params_.emplace_back(prefix + ".wv", a.wv);
    params_.emplace_back(prefix + ".wo", a.wo);
  };
  auto add_norm = [&](const std::string& prefix, const Norm& n) {
    params_.emplace_back(prefix + ".gain", n.gain);
    params_.emplace_back(prefix + ".bias", n.bias);
  };
  auto add_ffn = [&](const std::string& prefix, const Ffn& f) {
    params_.emplace_back(prefix + ".w1", f.w1);
    params_.emplace_back(prefix + ".b1", f.b1);
    params_.emplace_back(prefix + ".w2", f.w2);
    params_.emplace_back(prefix + ".b2", f.b2);
  };
  for (size_t l = 0; l < split_layers_.size(); ++l) {
    const std::string p = "split." + std::to_string(l);
    add_attn(p + ".cross", split_layers_[l].cross);
    add_norm(p + ".norm1", split_layers_[l].norm1);
    add_ffn(p + ".ffn", split_layers_[l].ffn);
    add_norm(p + ".norm2", split_layers_[l].norm2);
  }
  auto add_task = [&](const std::string& name, const std::vector<TaskLayer>& layers) {
    for (size_t l = 0; l < layers.size(); ++l) {
      const std::string p = name + "." + std::to_string(l);
      add_attn(p + ".self", layers[l].self_attn);
      add_norm(p + ".norm0", layers[l].norm0);
      add_attn(p + ".cross", layers[l].cross);
      add_norm(p + ".norm1", layers[l].norm1);
      add_ffn(p + ".ffn", layers[l].ffn);
      add_norm(p + ".norm2", layers[l].norm2);
    }
  };
  add_task("cst", cst_layers_);
  add_task("cat", cat_layers_);
  params_.emplace_back("head.cs.w1", head_cs_.w1);
  params_.emplace_back("head.cs.b1", head_cs_.b1);
  params_.emplace_back("head.cs.w2", head_cs_.w2);
  params_.emplace_back("head.cs.b2", head_cs_.b2);
  params_.emplace_back("head.ca.w1", head_ca_.w1);
  params_.emplace_back("head.ca.b1", head_ca_.b1);
  params_.emplace_back("head.ca.w2", head_ca_.w2);
  params_.emplace_back("head.ca.b2", head_ca_.b2);
}

Tensor TrinityNet::attend(const Attn& w, const Tensor& queries, const Tensor& keys) const {
  Tensor q = matmul(queries, w.wq);
  Tensor k = matmul(keys, w.wk);
  Tensor v = matmul(keys, w.wv);
  return matmul(scaled_dot_attention(q, k, v), w.wo);
}

Tensor TrinityNet::ffn_forward(const Ffn& f, const Tensor& x) const {
  return add_bias(matmul(gelu(add_bias(matmul(x, f.w1), f.b1)), f.w2), f.b2);
}

TrinityNet::SplitResult TrinityNet::split_forward(const FeatureMap& fm) const {
  if (fm.dim() != cfg_.feature_dim) {
    throw DimensionError("split_forward: feature dim " + std::to_string(fm.dim()) + " vs model D " +
                         std::to_string(cfg_.feature_dim));
  }
  const size_t p = fm.hf() * fm.wf();
  Tensor flat = reshape(fm.features, {p, cfg_.feature_dim});
  Tensor x = concat0(q_split_cs_, q_split_ca_);
  for (const CrossLayer& layer : split_layers_) {
    x = layer_norm(add(x, attend(layer.cross, x, flat)), layer.norm1.gain, layer.norm1.bias);
    x = layer_norm(add(x, ffn_forward(layer.ffn, x)), layer.norm2.gain, layer.norm2.bias);
  }
  // per-pixel similarity logits for the auxiliary split loss
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim));
  Tensor aux = reshape(scale(matmul(x, transpose(flat)), inv_sqrt_d),
                       {cfg_.n_split_cs + cfg_.n_split_ca, fm.hf(), fm.wf()});
  SplitResult result;
  result.q_cs = slice0(x, 0, cfg_.n_split_cs);
  result.q_ca = slice0(x, cfg_.n_split_cs, cfg_.n_split_cs + cfg_.n_split_ca);
  result.aux_logits = aux;
  return result;
}

Tensor TrinityNet::task_stack(const std::vector<TaskLayer>& layers, const Tensor& x0,
                              const Tensor& flat_features) const {
  Tensor x = x0;
  for (const TaskLayer& layer : layers) {
    x = layer_norm(add(x, attend(layer.self_attn, x, x)), layer.norm0.gain, layer.norm0.bias);
    x = layer_norm(add(x, attend(layer.cross, x, flat_features)), layer.norm1.gain,
                   layer.norm1.bias);
    x = layer_norm(add(x, ffn_forward(layer.ffn, x)), layer.norm2.gain, layer.norm2.bias);
  }
  return x;
}

Tensor TrinityNet::task_forward(const FeatureMap& fm, const QuerySet& own,
                                const QuerySet& context) const {
  if (own.role != QueryRole::Cst && own.role != QueryRole::Cat) {
    throw ContractError("task_forward: own queries must be CST or CAT");
  }
  const QueryRole expected =
      own.role == QueryRole::Cst ? QueryRole::SplitCa : QueryRole::SplitCs;
  if (context.role != expected) {
    throw ContractError(std::string("task_forward: ") +
                        (own.role == QueryRole::Cst ? "CST" : "CAT") +
                        " must receive the complementary branch's updated split queries");
  }
  if (own.embeddings.dim(1) != cfg_.feature_dim || context.embeddings.dim(1) != cfg_.feature_dim) {
    throw DimensionError("task_forward: query dim mismatch with model D " +
                         std::to_string(cfg_.feature_dim));
  }
  const size_t n_ctx = context.embeddings.dim(0);
  const size_t n_own = own.embeddings.dim(0);
  Tensor flat = reshape(fm.features, {fm.hf() * fm.wf(), cfg_.feature_dim});
  Tensor x = concat0(context.embeddings, own.embeddings);
  x = task_stack(own.role == QueryRole::Cst ? cst_layers_ : cat_layers_, x, flat);
  // context outputs are discarded
  return slice0(x, n_ctx, n_ctx + n_own);
}

Tensor TrinityNet::aggregate_queries(const Tensor& q_out, const std::vector<size_t>& region_of,
                                     size_t n_channels) {
  return group_mean0(q_out, region_of, n_channels);
}

Tensor TrinityNet::decode_masks(const MaskHead& head, const Tensor& channel_emb,
                                const FeatureMap& fm, size_t out_h, size_t out_w) const {
  const size_t channels = channel_emb.dim(0);
  Tensor hidden = gelu(add_bias(matmul(channel_emb, head.w1), head.b1));
  Tensor emb = add_bias(matmul(hidden, head.w2), head.b2);
  Tensor flat = reshape(fm.features, {fm.hf() * fm.wf(), cfg_.feature_dim});
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim));
  Tensor low = reshape(scale(matmul(emb, transpose(flat)), inv_sqrt_d),
                       {channels, fm.hf(), fm.wf()});
  return bilinear_upsample(low, out_h, out_w);
}

Tensor TrinityNet::mask_head_cs(const Tensor& channel_emb, const FeatureMap& fm, size_t out_h,
                                size_t out_w) const {
  return decode_masks(head_cs_, channel_emb, fm, out_h, out_w);
}

Tensor TrinityNet::mask_head_ca(const Tensor& channel_emb, const FeatureMap& fm, size_t out_h,
                                size_t out_w) const {
  return decode_masks(head_ca_, channel_emb, fm, out_h, out_w);
}

QuerySet TrinityNet::cst_queries() const {
  QuerySet qs;
  qs.role = QueryRole::Cst;
  qs.embeddings = q_cst_;
  qs.region_of.resize(cfg_.num_cs_classes * cfg_.queries_per_cs);
  for (size_t i = 0; i < qs.region_of.size(); ++i) qs.region_of[i] = i / cfg_.queries_per_cs;
  return qs;
}

QuerySet TrinityNet::cat_queries() const {
  QuerySet qs;
  qs.role = QueryRole::Cat;
  qs.embeddings = q_cat_;
  qs.region_of.resize(cfg_.num_ca_slots * cfg_.queries_per_ca);
  for (size_t i = 0; i < qs.region_of.size(); ++i) qs.region_of[i] = i / cfg_.queries_per_ca;
  return qs;
}

ModelOutput TrinityNet::forward(const Image& image) const {
  const FeatureMap fm = backbone_.encode_image(image);
  SplitResult split = split_forward(fm);

  QuerySet ctx_for_cst{QueryRole::SplitCa, split.q_ca, {}};
  QuerySet ctx_for_cat{QueryRole::SplitCs, split.q_cs, {}};
  QuerySet cst = cst_queries();
  QuerySet cat = cat_queries();

  Tensor cst_out = task_forward(fm, cst, ctx_for_cst);
  Tensor cat_out = task_forward(fm, cat, ctx_for_cat);

  Tensor cs_emb = aggregate_queries(cst_out, cst.region_of, cfg_.num_cs_classes);
  Tensor ca_emb = aggregate_queries(cat_out, cat.region_of, cfg_.num_ca_slots);

  Tensor cs_logits = mask_head_cs(cs_emb, fm, image.height, image.width);
  Tensor ca_logits = mask_head_ca(ca_emb, fm, image.height, image.width);

  ModelOutput out;
  out.logits = concat0(cs_logits, ca_logits);  // channel order [CS | CA]
  out.aux_split_logits = split.aux_logits;
  out.updated_split_cs = split.q_cs;
  out.updated_split_ca = split.q_ca;
  return out;
}

std::vector<std::pair<std::string, Tensor>> TrinityNet::named_parameters() const { return params_; }

void TrinityNet::set_parameter(const std::string& name, const std::vector<double>& values) {
  for (auto& [n, t] : params_) {
    if (n == name) {
      if (values.size() != t.size()) {
        throw DimensionError("set_parameter " + name + ": size " + std::to_string(values.size()) +
                             " vs " + std::to_string(t.size()));
      }
      t.mutable_values() = values;
      return;
    }
  }
  throw ContractError("set_parameter: unknown parameter \"" + name + "\"");
}

void TrinityNet::load_parameters(const std::vector<std::pair<std::string, Tensor>>& params) {
  if (params.size() != params_.size()) {
    throw ContractError("load_parameters: checkpoint has " + std::to_string(params.size()) +
                        " tensors, model expects " + std::to_string(params_.size()));
  }
  for (const auto& [name, tensor] : params) {
    bool found = false;
    for (auto& [n, t] : params_) {
      if (n == name) {
        if (tensor.shape() != t.shape()) {
          throw DimensionError("load_parameters " + name + ": shape " +
                               shape_to_string(tensor.shape()) + " vs model " +
                               shape_to_string(t.shape()));
        }
        t.mutable_values() = tensor.values();
        found = true;
        break;
      }
    }
    if (!found) throw ContractError("load_parameters: unexpected tensor \"" + name + "\"");
  }
}

}  // namespace trinity
