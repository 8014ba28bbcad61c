#pragma once

// Graph-attention actor and critic over EnvState.
//
// Each of the three graphs in the state has its own encoder of stacked GAT
// layers. The route graphs of a state are encoded as one disjoint union and
// mean-pooled per server. Per-server embeddings are fused with projected
// vector features and a global context row through a dense trunk; the actor
// scores every server from its trunk row, the critic pools the trunk rows.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "edgeorch/autodiff.hpp"
#include "edgeorch/env.hpp"

namespace edgeorch::nn {

struct ArchConfig {
  std::size_t deploy_features = 0;  // |S|
  std::size_t route_features = 0;   // |S|
  std::size_t invoke_features = kInvokeFeatureDim;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t gat_layers = 2;
  std::size_t trunk = 128;
  double leaky_slope = 0.2;

  void validate() const;
  static ArchConfig for_services(std::size_t services);
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct EdgeIndex {
  std::size_t nodes = 0;
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

// EnvState converted to network inputs. Raw features pass through
// sign(x) * log1p(|x|).
struct PreparedState {
  std::size_t servers = 0;
  Matrix deploy_x;
  EdgeIndex deploy_edges;
  Matrix route_x;  // disjoint union of all route graphs
  EdgeIndex route_edges;
  std::vector<std::size_t> route_server;  // union node -> server
  std::size_t route_graphs = 0;
  Matrix invoke_x;
  EdgeIndex invoke_edges;
  Matrix vector_x;  // servers x 2: arrival rate, availability
  std::size_t pending_service = 0;
  std::vector<std::uint8_t> mask;
};

PreparedState prepare(const EnvState& state);

class GatLayer {
 public:
  GatLayer(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t heads,
           std::size_t head_dim, std::size_t out, double slope);
  Var forward(Tape& tape, Var x, const EdgeIndex& edges) const;

 private:
  std::vector<Parameter*> weight_;
  std::vector<Parameter*> att_source_;
  std::vector<Parameter*> att_target_;
  Parameter* proj_;
  Parameter* bias_;
  double slope_;
};

class GraphEncoder {
 public:
  GraphEncoder(ParamStore& store, const std::string& prefix, std::size_t in, const ArchConfig& arch);
  Var forward(Tape& tape, Var x, const EdgeIndex& edges) const;

 private:
  std::vector<GatLayer> layers_;
};

// Encoder stack plus trunk; shared structure of actor and critic.
class StateNetwork {
 public:
  StateNetwork(const ArchConfig& arch, const std::string& prefix);
  StateNetwork(const StateNetwork&) = delete;
  StateNetwork& operator=(const StateNetwork&) = delete;

  // servers x trunk fused embedding.
  Var encode(Tape& tape, const PreparedState& input);

  const ArchConfig& arch() const { return arch_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  // Xavier-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

 protected:
  ArchConfig arch_;
  ParamStore params_;

 private:
  GraphEncoder deploy_;
  GraphEncoder route_;
  GraphEncoder invoke_;
  Parameter* vec_w_;
  Parameter* vec_b_;
  Parameter* trunk_w_;
  Parameter* trunk_b_;
};

inline constexpr double kMaskedLogit = -1e9;

// log pi(.|s) as a servers x 1 column; masked entries get kMaskedLogit added
// before normalisation so their probability is exactly 0. Throws
// ContractViolation for an all-zero mask.
Var masked_log_softmax(Var logits, const std::vector<std::uint8_t>& mask);

class ActorNet : public StateNetwork {
 public:
  explicit ActorNet(const ArchConfig& arch, std::uint64_t seed = 1);

  Var logits(Tape& tape, Var embedding);
  Var log_probs(Tape& tape, const PreparedState& input);
  std::vector<double> probabilities(const PreparedState& input);

 private:
  Parameter* head_w_;
  Parameter* head_b_;
};

class CriticNet : public StateNetwork {
 public:
  explicit CriticNet(const ArchConfig& arch, std::uint64_t seed = 2);

  Var value(Tape& tape, Var embedding);
  Var value(Tape& tape, const PreparedState& input);
  double value(const PreparedState& input);

 private:
  Parameter* head_w_;
  Parameter* head_b_;
};

// Entropy of a distribution given as log-probabilities (column), with
// zero-probability entries contributing 0.
Var entropy(Var log_probs);

}  // namespace edgeorch::nn
