#include "edgeorch/llm_cost.hpp"

#include "edgeorch/errors.hpp"

namespace edgeorch {

namespace {

constexpr double kBytesPerGb = 1e9;

// (2 + 2g/d + 3m) * H, expanded so every partial product is an integer
// whenever H is divisible by d and m*H is integral. Keeps the double
// evaluation exact for realistic model shapes.
double layer_width(const LlmProfile& p) {
  const double H = static_cast<double>(p.hidden_dim);
  const double kv = static_cast<double>(p.kv_width());
  return 2.0 * H + 2.0 * kv + 3.0 * (p.ffn_multiplier * H);
}

}  // namespace

void LlmProfile::validate() const {
  if (hidden_dim <= 0 || n_heads <= 0 || n_kv_groups <= 0 || n_layers <= 0 || seq_in <= 0 ||
      seq_out < 1 || !(ffn_multiplier > 0.0))
    throw ConfigError("LLM profile fields must be positive (seq_out >= 1)");
  if (n_heads % n_kv_groups != 0) throw ConfigError("n_heads must be a multiple of n_kv_groups");
  if (hidden_dim % n_heads != 0) throw ConfigError("hidden_dim must be a multiple of n_heads");
}

double prefill_flops(const LlmProfile& p) {
  const double H = static_cast<double>(p.hidden_dim);
  const double s_in = static_cast<double>(p.seq_in);
  return 2.0 * (layer_width(p) + 2.0 * s_in) * s_in * H;
}

double decode_flops(const LlmProfile& p) {
  const double H = static_cast<double>(p.hidden_dim);
  const double s_in = static_cast<double>(p.seq_in);
  const double s_out = static_cast<double>(p.seq_out);
  return 2.0 * (layer_width(p) + 2.0 * s_in + s_out) * (s_out - 1.0) * H;
}

double total_flops(const LlmProfile& p) {
  return (prefill_flops(p) + decode_flops(p)) * static_cast<double>(p.n_layers);
}

double merged_total_flops(const LlmProfile& p) {
  const double H = static_cast<double>(p.hidden_dim);
  const double L = static_cast<double>(p.n_layers);
  const double s_in = static_cast<double>(p.seq_in);
  const double s_out = static_cast<double>(p.seq_out);
  const double bracket = layer_width(p) * (s_in + s_out - 1.0) + 2.0 * s_in * s_in +
                         (2.0 * s_in + s_out) * (s_out - 1.0);
  return 2.0 * bracket * H * L;
}

double ai_service_rate(const LlmProfile& p, const GpuProfile& gpu) {
  const double flops = total_flops(p);
  if (!(flops > 0.0)) throw ContractViolation("total_flops must be positive");
  if (!(gpu.flops_per_second > 0.0)) throw ConfigError("GPU throughput must be positive");
  return gpu.flops_per_second / flops;
}

LlmMemory ai_service_memory(const LlmProfile& p, double bytes_per_param) {
  if (!(bytes_per_param > 0.0)) throw ConfigError("bytes_per_param must be positive");
  const double H = static_cast<double>(p.hidden_dim);
  const double L = static_cast<double>(p.n_layers);
  const double kv = static_cast<double>(p.kv_width());
  LlmMemory mem;
  mem.weight_params = layer_width(p) * H * L;
  mem.kv_values = 2.0 * static_cast<double>(p.seq_in + p.seq_out - 1) * kv * L;
  mem.weights_gb = mem.weight_params * bytes_per_param / kBytesPerGb;
  mem.kv_cache_gb = mem.kv_values * bytes_per_param / kBytesPerGb;
  return mem;
}

}  // namespace edgeorch
