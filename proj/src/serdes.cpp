#include "jetssm/serdes.hpp"

namespace jetssm {

using nlohmann::json;

namespace {

std::string norm_kind_name(NormKind k) {
  return k == NormKind::BatchOverTime ? "batch_over_time" : "layer";
}
NormKind norm_kind_parse(const std::string& s) {
  if (s == "batch_over_time") return NormKind::BatchOverTime;
  if (s == "layer") return NormKind::Layer;
  throw ValidationError("unknown norm kind '" + s + "'");
}
std::string method_name(Discretization m) {
  return m == Discretization::ZOH ? "zoh" : "bilinear";
}
Discretization method_parse(const std::string& s) {
  if (s == "zoh") return Discretization::ZOH;
  if (s == "bilinear") return Discretization::Bilinear;
  throw ValidationError("unknown discretization '" + s + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const ModelConfig& c) {
  j = json{{"in_channels", c.in_channels},
           {"hidden_dim", c.hidden_dim},
           {"out_channels", c.out_channels},
           {"n_blocks", c.n_blocks},
           {"n_state", c.n_state},
           {"dropout", c.dropout},
           {"norm_kind", norm_kind_name(c.norm_kind)},
           {"method", method_name(c.method)},
           {"seed", c.seed},
           {"feedthrough", c.feedthrough},
           {"shared_a", c.shared_a},
           {"conj_pairs", c.conj_pairs},
           {"gru_layers", c.gru_layers},
           {"mlp_hidden_layers", c.mlp_hidden_layers}};
}

void from_json(const json& j, ModelConfig& c) {
  maybe(j, "in_channels", c.in_channels);
  maybe(j, "hidden_dim", c.hidden_dim);
  maybe(j, "out_channels", c.out_channels);
  maybe(j, "n_blocks", c.n_blocks);
  maybe(j, "n_state", c.n_state);
  maybe(j, "dropout", c.dropout);
  if (j.contains("norm_kind")) c.norm_kind = norm_kind_parse(j.at("norm_kind"));
  if (j.contains("method")) c.method = method_parse(j.at("method"));
  maybe(j, "seed", c.seed);
  maybe(j, "feedthrough", c.feedthrough);
  maybe(j, "shared_a", c.shared_a);
  maybe(j, "conj_pairs", c.conj_pairs);
  maybe(j, "gru_layers", c.gru_layers);
  maybe(j, "mlp_hidden_layers", c.mlp_hidden_layers);
}

void to_json(json& j, const NormStats& s) {
  j = json{{"mean", s.mean}, {"stddev", s.stddev}, {"source_frames", s.source_frames}};
}

void from_json(const json& j, NormStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("stddev").get_to(s.stddev);
  maybe(j, "source_frames", s.source_frames);
}

void to_json(json& j, const StairsSchedule& s) {
  j = json{{"standoffs_mm", s.standoffs_mm},
           {"dwell_s", s.dwell_s},
           {"transition_s", s.transition_s},
           {"traverse_speed_mm_s", s.traverse_speed_mm_s},
           {"segment_length_mm", s.segment_length_mm},
           {"lead_in_s", s.lead_in_s},
           {"lead_out_s", s.lead_out_s}};
}

void from_json(const json& j, StairsSchedule& s) {
  maybe(j, "standoffs_mm", s.standoffs_mm);
  maybe(j, "dwell_s", s.dwell_s);
  maybe(j, "transition_s", s.transition_s);
  maybe(j, "traverse_speed_mm_s", s.traverse_speed_mm_s);
  maybe(j, "segment_length_mm", s.segment_length_mm);
  maybe(j, "lead_in_s", s.lead_in_s);
  maybe(j, "lead_out_s", s.lead_out_s);
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"sample_rate", c.sample_rate},
           {"frames", c.frames},
           {"sonotrode_hz", c.sonotrode_hz},
           {"profile_noise_um", c.profile_noise_um},
           {"noise_correlation_cols", c.noise_correlation_cols},
           {"metal_noise_um", c.metal_noise_um},
           {"depth_smoothing_frames", c.depth_smoothing_frames},
           {"bump_width_cols", c.bump_width_cols},
           {"edge_ramp_s", c.edge_ramp_s},
           {"tone_amplitude", c.tone_amplitude},
           {"cement_amplitude", c.cement_amplitude},
           {"metal_amplitude", c.metal_amplitude},
           {"white_amplitude", c.white_amplitude},
           {"cement_band_lo_hz", c.cement_band_lo_hz},
           {"cement_band_hi_hz", c.cement_band_hi_hz},
           {"metal_band_lo_hz", c.metal_band_lo_hz},
           {"metal_band_hi_hz", c.metal_band_hi_hz},
           {"band_sines", c.band_sines},
           {"depth_ref_um", c.depth_ref_um}};
}

void from_json(const json& j, GeneratorConfig& c) {
  maybe(j, "sample_rate", c.sample_rate);
  maybe(j, "frames", c.frames);
  maybe(j, "sonotrode_hz", c.sonotrode_hz);
  maybe(j, "profile_noise_um", c.profile_noise_um);
  maybe(j, "noise_correlation_cols", c.noise_correlation_cols);
  maybe(j, "metal_noise_um", c.metal_noise_um);
  maybe(j, "depth_smoothing_frames", c.depth_smoothing_frames);
  maybe(j, "bump_width_cols", c.bump_width_cols);
  maybe(j, "edge_ramp_s", c.edge_ramp_s);
  maybe(j, "tone_amplitude", c.tone_amplitude);
  maybe(j, "cement_amplitude", c.cement_amplitude);
  maybe(j, "metal_amplitude", c.metal_amplitude);
  maybe(j, "white_amplitude", c.white_amplitude);
  maybe(j, "cement_band_lo_hz", c.cement_band_lo_hz);
  maybe(j, "cement_band_hi_hz", c.cement_band_hi_hz);
  maybe(j, "metal_band_lo_hz", c.metal_band_lo_hz);
  maybe(j, "metal_band_hi_hz", c.metal_band_hi_hz);
  maybe(j, "band_sines", c.band_sines);
  maybe(j, "depth_ref_um", c.depth_ref_um);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_eps", c.adam_eps},
           {"dropout", c.dropout},
           {"seed", c.seed},
           {"window", c.window},
           {"stride", c.stride},
           {"standardize_targets", c.standardize_targets},
           {"profile_mask_prob", c.profile_mask_prob}};
}

void from_json(const json& j, TrainConfig& c) {
  maybe(j, "epochs", c.epochs);
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "beta1", c.beta1);
  maybe(j, "beta2", c.beta2);
  maybe(j, "adam_eps", c.adam_eps);
  maybe(j, "dropout", c.dropout);
  maybe(j, "seed", c.seed);
  maybe(j, "window", c.window);
  maybe(j, "stride", c.stride);
  maybe(j, "standardize_targets", c.standardize_targets);
  maybe(j, "profile_mask_prob", c.profile_mask_prob);
}

void to_json(json& j, const TrialSpace& s) {
  j = json{{"kind", to_string(s.kind)},
           {"hidden_dims", s.hidden_dims},
           {"n_blocks_min", s.n_blocks_min},
           {"n_blocks_max", s.n_blocks_max},
           {"n_states", s.n_states},
           {"lr_min", s.lr_min},
           {"lr_max", s.lr_max},
           {"dropout_min", s.dropout_min},
           {"dropout_max", s.dropout_max},
           {"mlp_layers_min", s.mlp_layers_min},
           {"mlp_layers_max", s.mlp_layers_max},
           {"gru_layers_min", s.gru_layers_min},
           {"gru_layers_max", s.gru_layers_max},
           {"n_trials", s.n_trials}};
}

void from_json(const json& j, TrialSpace& s) {
  if (j.contains("kind")) s.kind = model_kind_from_string(j.at("kind"));
  maybe(j, "hidden_dims", s.hidden_dims);
  maybe(j, "n_blocks_min", s.n_blocks_min);
  maybe(j, "n_blocks_max", s.n_blocks_max);
  maybe(j, "n_states", s.n_states);
  maybe(j, "lr_min", s.lr_min);
  maybe(j, "lr_max", s.lr_max);
  maybe(j, "dropout_min", s.dropout_min);
  maybe(j, "dropout_max", s.dropout_max);
  maybe(j, "mlp_layers_min", s.mlp_layers_min);
  maybe(j, "mlp_layers_max", s.mlp_layers_max);
  maybe(j, "gru_layers_min", s.gru_layers_min);
  maybe(j, "gru_layers_max", s.gru_layers_max);
  maybe(j, "n_trials", s.n_trials);
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"model_name", r.model_name},
           {"model_kind", to_string(r.kind)},
           {"config", r.config},
           {"tau_um", r.tau_um},
           {"accuracy_pct", r.accuracy_pct},
           {"accuracy_normalized_pct", r.accuracy_norm_pct},
           {"mse_um2", r.mse_um2},
           {"frame_abs_err_um", r.frame_abs_err_um},
           {"column_abs_err_um", r.column_abs_err_um}};
}

}  // namespace jetssm
