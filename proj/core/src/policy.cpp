#include "edgeorch/policy.hpp"

#include <cmath>

#include "edgeorch/errors.hpp"
#include "edgeorch/random.hpp"

namespace edgeorch::nn {

namespace {

double squash(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

Matrix feature_matrix(const FeatureGraph& g) {
  Matrix m(Index(g.nodes), Index(g.feature_dim));
  for (std::size_t i = 0; i < g.features.size(); ++i) m.data()[i] = squash(g.features[i]);
  return m;
}

EdgeIndex edge_index(const FeatureGraph& g, std::size_t offset = 0) {
  EdgeIndex e;
  e.nodes = g.nodes;
  e.source.reserve(g.edges.size());
  e.target.reserve(g.edges.size());
  for (const auto& [s, t] : g.edges) {
    e.source.push_back(offset + s);
    e.target.push_back(offset + t);
  }
  return e;
}

bool is_bias(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, "/b") == 0;
}

}  // namespace

void ArchConfig::validate() const {
  if (deploy_features == 0 || route_features == 0 || invoke_features == 0)
    throw ConfigError("architecture needs positive input widths");
  if (hidden == 0 || heads == 0 || head_dim == 0 || gat_layers == 0 || trunk == 0)
    throw ConfigError("architecture widths and depths must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky slope must lie in [0, 1)");
}

ArchConfig ArchConfig::for_services(std::size_t services) {
  ArchConfig a;
  a.deploy_features = services;
  a.route_features = services;
  return a;
}

PreparedState prepare(const EnvState& state) {
  PreparedState p;
  const std::size_t N = state.servers();
  p.servers = N;
  p.deploy_x = feature_matrix(state.deploy_graph);
  p.deploy_edges = edge_index(state.deploy_graph);
  p.invoke_x = feature_matrix(state.invoke_graph);
  p.invoke_edges = edge_index(state.invoke_graph);
  p.pending_service = state.pending_service;
  p.mask = state.avail_mask;

  p.route_graphs = state.route_graphs.size();
  const std::size_t width = state.deploy_graph.feature_dim;
  p.route_x = Matrix::Zero(Index(N * p.route_graphs), Index(width));
  p.route_edges.nodes = N * p.route_graphs;
  for (std::size_t g = 0; g < p.route_graphs; ++g) {
    const auto& rg = state.route_graphs[g];
    if (rg.nodes != N || rg.feature_dim != width) throw ContractViolation("route graph shape mismatch");
    p.route_x.middleRows(Index(g * N), Index(N)) = feature_matrix(rg);
    const auto e = edge_index(rg, g * N);
    p.route_edges.source.insert(p.route_edges.source.end(), e.source.begin(), e.source.end());
    p.route_edges.target.insert(p.route_edges.target.end(), e.target.begin(), e.target.end());
    for (std::size_t n = 0; n < N; ++n) p.route_server.push_back(n);
  }

  p.vector_x.resize(Index(N), 2);
  for (std::size_t n = 0; n < N; ++n) {
    p.vector_x(Index(n), 0) = squash(state.arrival_dist[n]);
    p.vector_x(Index(n), 1) = state.avail_mask[n] ? 1.0 : 0.0;
  }
  return p;
}

GatLayer::GatLayer(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t heads,
                   std::size_t head_dim, std::size_t out, double slope)
    : slope_(slope) {
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + "/h" + std::to_string(h);
    weight_.push_back(&store.add(hp + "/W", Index(in), Index(head_dim)));
    att_source_.push_back(&store.add(hp + "/a_src", Index(head_dim), 1));
    att_target_.push_back(&store.add(hp + "/a_dst", Index(head_dim), 1));
  }
  proj_ = &store.add(prefix + "/proj", Index(heads * head_dim), Index(out));
  bias_ = &store.add(prefix + "/b", 1, Index(out));
}

Var GatLayer::forward(Tape& tape, Var x, const EdgeIndex& edges) const {
  std::vector<Var> heads;
  heads.reserve(weight_.size());
  for (std::size_t h = 0; h < weight_.size(); ++h) {
    Var z = matmul(x, tape.param(*weight_[h]));
    Var s_src = matmul(z, tape.param(*att_source_[h]));
    Var s_dst = matmul(z, tape.param(*att_target_[h]));
    Var score = leaky_relu(add(gather_rows(s_dst, edges.target), gather_rows(s_src, edges.source)), slope_);
    Var alpha = segment_softmax(score, edges.target, edges.nodes);
    Var message = mul(gather_rows(z, edges.source), alpha);
    heads.push_back(scatter_add_rows(message, edges.target, edges.nodes));
  }
  Var joined = elu(heads.size() == 1 ? heads[0] : concat_cols(heads));
  return elu(add(matmul(joined, tape.param(*proj_)), tape.param(*bias_)));
}

GraphEncoder::GraphEncoder(ParamStore& store, const std::string& prefix, std::size_t in,
                           const ArchConfig& arch) {
  for (std::size_t l = 0; l < arch.gat_layers; ++l) {
    layers_.emplace_back(store, prefix + "/l" + std::to_string(l), l == 0 ? in : arch.hidden, arch.heads,
                         arch.head_dim, arch.hidden, arch.leaky_slope);
  }
}

Var GraphEncoder::forward(Tape& tape, Var x, const EdgeIndex& edges) const {
  for (const auto& layer : layers_) x = layer.forward(tape, x, edges);
  return x;
}

StateNetwork::StateNetwork(const ArchConfig& arch, const std::string& prefix)
    : arch_((arch.validate(), arch)),
      deploy_(params_, prefix + "/deploy", arch.deploy_features, arch),
      route_(params_, prefix + "/route", arch.route_features, arch),
      invoke_(params_, prefix + "/invoke", arch.invoke_features, arch) {
  vec_w_ = &params_.add(prefix + "/vector/W", 2, Index(arch.hidden));
  vec_b_ = &params_.add(prefix + "/vector/b", 1, Index(arch.hidden));
  trunk_w_ = &params_.add(prefix + "/trunk/W", Index(7 * arch.hidden), Index(arch.trunk));
  trunk_b_ = &params_.add(prefix + "/trunk/b", 1, Index(arch.trunk));
}

void StateNetwork::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < params_.tensors(); ++i) {
    auto& p = params_.at(i);
    p.grad.setZero();
    if (is_bias(p.name)) {
      p.value.setZero();
      continue;
    }
    const double bound = std::sqrt(6.0 / double(p.value.rows() + p.value.cols()));
    for (Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = rng.uniform(-bound, bound);
  }
}

Var StateNetwork::encode(Tape& tape, const PreparedState& in) {
  const std::size_t N = in.servers;
  if (in.deploy_x.rows() != Index(N) || in.deploy_x.cols() != Index(arch_.deploy_features))
    throw ContractViolation("deploy features do not match the architecture");
  if (in.invoke_x.cols() != Index(arch_.invoke_features))
    throw ContractViolation("invoke features do not match the architecture");
  if (in.pending_service >= std::size_t(in.invoke_x.rows()))
    throw ContractViolation("pending service outside the invoke graph");

  Var h_deploy = deploy_.forward(tape, tape.constant(in.deploy_x), in.deploy_edges);
  Var h_invoke = invoke_.forward(tape, tape.constant(in.invoke_x), in.invoke_edges);

  Var h_route;
  if (in.route_graphs > 0) {
    if (in.route_x.cols() != Index(arch_.route_features))
      throw ContractViolation("route features do not match the architecture");
    Var all = route_.forward(tape, tape.constant(in.route_x), in.route_edges);
    h_route = scale(scatter_add_rows(all, in.route_server, N), 1.0 / double(in.route_graphs));
  } else {
    h_route = tape.constant(Matrix::Zero(Index(N), Index(arch_.hidden)));
  }

  Var h_vec = elu(add(matmul(tape.constant(in.vector_x), tape.param(*vec_w_)), tape.param(*vec_b_)));
  Var global = concat_cols({mean_rows(h_deploy), mean_rows(h_route), mean_rows(h_invoke),
                            gather_rows(h_invoke, {in.pending_service})});
  Var fused = concat_cols({h_deploy, h_route, h_vec, broadcast_rows(global, N)});
  return elu(add(matmul(fused, tape.param(*trunk_w_)), tape.param(*trunk_b_)));
}

Var masked_log_softmax(Var logits, const std::vector<std::uint8_t>& mask) {
  if (logits.cols() != 1 || logits.rows() != Index(mask.size()))
    throw ContractViolation("mask length does not match the logits");
  Matrix offset(logits.rows(), 1);
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    offset(Index(i), 0) = mask[i] ? 0.0 : kMaskedLogit;
    any = any || mask[i];
  }
  if (!any) throw ContractViolation("every action is masked");
  return log_softmax(add(logits, logits.tape->constant(std::move(offset))));
}

Var entropy(Var log_probs) { return neg(sum(mul(exp(log_probs), log_probs))); }

ActorNet::ActorNet(const ArchConfig& arch, std::uint64_t seed) : StateNetwork(arch, "actor") {
  head_w_ = &params_.add("actor/head/W", Index(arch.trunk), 1);
  head_b_ = &params_.add("actor/head/b", 1, 1);
  initialize(seed);
}

Var ActorNet::logits(Tape& tape, Var embedding) {
  return add(matmul(embedding, tape.param(*head_w_)), tape.param(*head_b_));
}

Var ActorNet::log_probs(Tape& tape, const PreparedState& input) {
  return masked_log_softmax(logits(tape, encode(tape, input)), input.mask);
}

std::vector<double> ActorNet::probabilities(const PreparedState& input) {
  Tape tape;
  const Matrix& lp = log_probs(tape, input).value();
  std::vector<double> p(std::size_t(lp.rows()));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = input.mask[i] ? std::exp(lp(Index(i), 0)) : 0.0;
  return p;
}

CriticNet::CriticNet(const ArchConfig& arch, std::uint64_t seed) : StateNetwork(arch, "critic") {
  head_w_ = &params_.add("critic/head/W", Index(arch.trunk), 1);
  head_b_ = &params_.add("critic/head/b", 1, 1);
  initialize(seed);
}

Var CriticNet::value(Tape& tape, Var embedding) {
  return add(matmul(mean_rows(embedding), tape.param(*head_w_)), tape.param(*head_b_));
}

Var CriticNet::value(Tape& tape, const PreparedState& input) { return value(tape, encode(tape, input)); }

double CriticNet::value(const PreparedState& input) {
  Tape tape;
  return value(tape, input).scalar();
}

}  // namespace edgeorch::nn
