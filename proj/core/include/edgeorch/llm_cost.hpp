#pragma once

// Closed-form transformer inference cost: FLOPs of the prefill and
// autoregressive decoding stages for a grouped-query-attention decoder with a
// SwiGLU feed-forward block, plus the weight + KV-cache memory footprint.
//
// All counts are per request. Multiply-accumulates count as two FLOPs;
// softmax, RoPE and normalisation are ignored.

#include <cstdint>

namespace edgeorch {

struct LlmProfile {
  std::int64_t hidden_dim = 0;     // H
  std::int64_t n_heads = 0;        // d
  std::int64_t n_kv_groups = 0;    // g (number of KV heads)
  double ffn_multiplier = 0.0;     // m, FFN width = m * H
  std::int64_t n_layers = 0;       // L
  std::int64_t seq_in = 0;         // prompt tokens
  std::int64_t seq_out = 1;        // generated tokens (the first comes from prefill)

  // Throws ConfigError unless all fields are positive, d % g == 0 and H % d == 0.
  void validate() const;

  std::int64_t head_dim() const { return hidden_dim / n_heads; }
  // g * h, width of the K and V projections.
  std::int64_t kv_width() const { return n_kv_groups * head_dim(); }
};

struct GpuProfile {
  double flops_per_second = 0.0;
};

// One layer, full prompt.
double prefill_flops(const LlmProfile& p);

// One layer, all s_out - 1 decoding steps.
double decode_flops(const LlmProfile& p);

// (prefill + decode) * L.
double total_flops(const LlmProfile& p);

// The merged single-expression form of total_flops; equal to it term for term.
double merged_total_flops(const LlmProfile& p);

// Requests per second one GPU sustains for this profile.
double ai_service_rate(const LlmProfile& p, const GpuProfile& gpu);

// At two bytes per value the byte counts are 2(2 + 2g/d + 3m) H^2 L for the
// weights and 4(s_in + s_out - 1)(g/d) H L for the KV cache.
struct LlmMemory {
  double weight_params = 0.0;  // (2 + 2g/d + 3m) H^2 L
  double kv_values = 0.0;      // K and V: 2(s_in + s_out - 1)(g/d) H L
  double weights_gb = 0.0;
  double kv_cache_gb = 0.0;
  double total_gb() const { return weights_gb + kv_cache_gb; }
};

inline constexpr double kDefaultBytesPerParam = 2.0;

LlmMemory ai_service_memory(const LlmProfile& p, double bytes_per_param = kDefaultBytesPerParam);

}  // namespace edgeorch
