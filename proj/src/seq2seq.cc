// Copyright 2026 The selfdistill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selfdistill/seq2seq.h"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstring>
#include <type_traits>

#include "json.hpp"
#include "selfdistill/error.h"
#include "selfdistill/util/digest.h"
#include "selfdistill/util/random.h"

namespace selfdistill {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kPretrained: return "pretrained";
    case Stage::kFineTuned: return "fine_tuned";
    case Stage::kImproved: return "improved";
  }
  return "pretrained";
}

Stage parse_stage(std::string_view name) {
  if (name == "pretrained") return Stage::kPretrained;
  if (name == "fine_tuned") return Stage::kFineTuned;
  if (name == "improved") return Stage::kImproved;
  throw DataError("unknown stage '" + std::string(name) + "'");
}

std::vector<ParamShape> param_manifest(const ModelDims& dims) {
  const std::size_t V = dims.vocab_size, D = dims.dim;
  return {
      {"embedding", V, D},     {"encoder.W", 3 * D, D}, {"encoder.U", 3 * D, D},
      {"encoder.b", 3 * D, 1}, {"decoder.W", 3 * D, D}, {"decoder.U", 3 * D, D},
      {"decoder.b", 3 * D, 1}, {"output.W", D, 2 * D},  {"output.b", D, 1},
      {"output.bias", V, 1},
  };
}

std::size_t param_count(const ModelDims& dims) {
  std::size_t n = 0;
  for (const auto& s : param_manifest(dims)) n += s.rows * s.cols;
  return n;
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Views over a flat parameter (or gradient) buffer in manifest order.
template <bool kConst>
struct Blocks {
  using M = Eigen::Map<std::conditional_t<kConst, const Mat, Mat>>;
  using V = Eigen::Map<std::conditional_t<kConst, const Vec, Vec>>;
  using Ptr = std::conditional_t<kConst, const double*, double*>;

  M embedding;
  M enc_w;
  M enc_u;
  V enc_b;
  M dec_w;
  M dec_u;
  V dec_b;
  M out_w;
  V out_b;
  V out_bias;
};

template <bool kConst>
Blocks<kConst> make_blocks(const ModelDims& dims, typename Blocks<kConst>::Ptr data) {
  using B = Blocks<kConst>;
  const Index V = static_cast<Index>(dims.vocab_size);
  const Index D = static_cast<Index>(dims.dim);
  Index off = 0;
  auto m = [&](Index r, Index c) {
    typename B::M x(data + off, r, c);
    off += r * c;
    return x;
  };
  auto v = [&](Index r) {
    typename B::V x(data + off, r);
    off += r;
    return x;
  };
  return B{m(V, D), m(3 * D, D), m(3 * D, D), v(3 * D), m(3 * D, D),
           m(3 * D, D), v(3 * D), m(D, 2 * D), v(D), v(V)};
}

using Params = Blocks<true>;
using Grads = Blocks<false>;

Vec sigmoid(const Vec& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

Vec log_softmax(const Vec& x) {
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}

struct GruStep {
  Vec x;
  Vec h_prev;
  Vec z;
  Vec r;
  Vec n;
  Vec h;
};

template <class M, class V>
void gru_forward(const M& W, const M& U, const V& b, const Vec& x, const Vec& h_prev,
                 GruStep& st) {
  const Index D = h_prev.size();
  const Vec a = W * x + b;
  const Vec uzr = U.topRows(2 * D) * h_prev;
  st.x = x;
  st.h_prev = h_prev;
  st.z = sigmoid(a.head(D) + uzr.head(D));
  st.r = sigmoid(a.segment(D, D) + uzr.tail(D));
  const Vec rh = st.r.cwiseProduct(h_prev);
  st.n = (a.tail(D) + U.bottomRows(D) * rh).array().tanh().matrix();
  st.h = (1.0 - st.z.array()).matrix().cwiseProduct(st.n) + st.z.cwiseProduct(h_prev);
}

// Accumulates parameter gradients; returns d(h_prev) and d(x).
template <class M, class GM, class GV>
void gru_backward(const M& W, const M& U, const GruStep& st, const Vec& dh, GM& gW, GM& gU,
                  GV& gb, Vec& dh_prev, Vec& dx) {
  const Index D = dh.size();
  const Vec dz = dh.cwiseProduct(st.h_prev - st.n);
  const Vec dn = dh.cwiseProduct((1.0 - st.z.array()).matrix());
  dh_prev = dh.cwiseProduct(st.z);
  const Vec dn_pre = dn.cwiseProduct((1.0 - st.n.array().square()).matrix());
  const Vec dz_pre = dz.cwiseProduct((st.z.array() * (1.0 - st.z.array())).matrix());
  const Vec rh = st.r.cwiseProduct(st.h_prev);
  const Vec d_rh = U.bottomRows(D).transpose() * dn_pre;
  gU.bottomRows(D).noalias() += dn_pre * rh.transpose();
  dh_prev += d_rh.cwiseProduct(st.r);
  const Vec dr_pre = d_rh.cwiseProduct(st.h_prev)
                         .cwiseProduct((st.r.array() * (1.0 - st.r.array())).matrix());
  Vec da(3 * D);
  da << dz_pre, dr_pre, dn_pre;
  gW.noalias() += da * st.x.transpose();
  gb += da;
  dx = W.transpose() * da;
  gU.topRows(2 * D).noalias() += da.head(2 * D) * st.h_prev.transpose();
  dh_prev.noalias() += U.topRows(2 * D).transpose() * da.head(2 * D);
}

struct OutputStep {
  Vec alpha;
  Vec context;
  Vec o;
  Vec logp;
};

void output_forward(const Params& p, const Mat& H, const Vec& s, OutputStep& out) {
  const Index D = s.size();
  const Vec scores = H.transpose() * s;
  out.alpha = log_softmax(scores).array().exp().matrix();
  out.context = H * out.alpha;
  Vec u(2 * D);
  u << s, out.context;
  out.o = (p.out_w * u + p.out_b).array().tanh().matrix();
  out.logp = log_softmax(p.embedding * out.o + p.out_bias);
}

Vec embed(const Params& p, TokenId token) { return p.embedding.row(token).transpose(); }

// Encoder states as columns; input is source followed by EOS.
Mat encode(const Params& p, const TokenSequence& source, std::vector<GruStep>* steps) {
  const Index D = p.out_b.size();
  Mat H(D, static_cast<Index>(source.size()) + 1);
  Vec h = Vec::Zero(D);
  GruStep st;
  for (std::size_t t = 0; t <= source.size(); ++t) {
    const TokenId tok = t < source.size() ? source[t] : kEos;
    gru_forward(p.enc_w, p.enc_u, p.enc_b, embed(p, tok), h, st);
    h = st.h;
    H.col(static_cast<Index>(t)) = h;
    if (steps) steps->push_back(st);
  }
  return H;
}

void check_ids(const TokenSequence& seq, std::size_t vocab_size, std::size_t index,
               const char* what) {
  for (TokenId t : seq) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      throw DataError("example " + std::to_string(index) + ": " + what + " id " +
                      std::to_string(t) + " outside the vocabulary");
    }
  }
}

// Adds scale * d(loss)/d(params) into `grads` and returns the summed NLL.
double example_loss(const Params& p, Grads* g, const ExamplePair& ex, double scale) {
  const Index D = p.out_b.size();
  std::vector<GruStep> enc_steps;
  enc_steps.reserve(ex.source.size() + 1);
  const Mat H = encode(p, ex.source, g ? &enc_steps : nullptr);

  const std::size_t T = ex.target.size() + 1;
  std::vector<GruStep> dec_steps(T);
  std::vector<OutputStep> out_steps(T);
  Vec s = H.col(H.cols() - 1);
  double nll = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const TokenId in = t == 0 ? kBos : ex.target[t - 1];
    const TokenId gold = t < ex.target.size() ? ex.target[t] : kEos;
    gru_forward(p.dec_w, p.dec_u, p.dec_b, embed(p, in), s, dec_steps[t]);
    s = dec_steps[t].h;
    output_forward(p, H, s, out_steps[t]);
    nll -= out_steps[t].logp[gold];
  }
  if (!g) return nll;

  Mat dH = Mat::Zero(D, H.cols());
  Vec carry = Vec::Zero(D);
  Vec dh_prev, dx;
  for (std::size_t t = T; t-- > 0;) {
    const TokenId in = t == 0 ? kBos : ex.target[t - 1];
    const TokenId gold = t < ex.target.size() ? ex.target[t] : kEos;
    const OutputStep& os = out_steps[t];
    const Vec& st = dec_steps[t].h;

    Vec dlogits = os.logp.array().exp().matrix();
    dlogits[gold] -= 1.0;
    dlogits *= scale;
    g->embedding.noalias() += dlogits * os.o.transpose();
    g->out_bias += dlogits;
    const Vec d_o = p.embedding.transpose() * dlogits;
    const Vec do_pre = d_o.cwiseProduct((1.0 - os.o.array().square()).matrix());
    Vec u(2 * D);
    u << st, os.context;
    g->out_w.noalias() += do_pre * u.transpose();
    g->out_b += do_pre;
    const Vec du = p.out_w.transpose() * do_pre;
    Vec ds = du.head(D);
    const Vec dc = du.tail(D);
    const Vec dalpha = H.transpose() * dc;
    dH.noalias() += dc * os.alpha.transpose();
    const Vec dscores =
        os.alpha.cwiseProduct((dalpha.array() - os.alpha.dot(dalpha)).matrix());
    ds.noalias() += H * dscores;
    dH.noalias() += st * dscores.transpose();

    ds += carry;
    gru_backward(p.dec_w, p.dec_u, dec_steps[t], ds, g->dec_w, g->dec_u, g->dec_b, dh_prev,
                 dx);
    carry = dh_prev;
    g->embedding.row(in) += dx.transpose();
  }
  dH.col(H.cols() - 1) += carry;

  carry.setZero();
  for (std::size_t t = enc_steps.size(); t-- > 0;) {
    const TokenId tok = t < ex.source.size() ? ex.source[t] : kEos;
    const Vec dh = dH.col(static_cast<Index>(t)) + carry;
    gru_backward(p.enc_w, p.enc_u, enc_steps[t], dh, g->enc_w, g->enc_u, g->enc_b, dh_prev,
                 dx);
    carry = dh_prev;
    g->embedding.row(tok) += dx.transpose();
  }
  return nll;
}

class Seq2SeqCursor final : public DecoderCursor {
 public:
  Seq2SeqCursor(std::shared_ptr<const Checkpoint> ckpt, std::shared_ptr<const Mat> states,
                const Vec& prev_state, TokenId input)
      : ckpt_(std::move(ckpt)), states_(std::move(states)) {
    const Params p = make_blocks<true>(ckpt_->dims, ckpt_->params.data());
    GruStep st;
    gru_forward(p.dec_w, p.dec_u, p.dec_b, embed(p, input), prev_state, st);
    state_ = st.h;
    OutputStep out;
    output_forward(p, *states_, state_, out);
    logprobs_.assign(out.logp.data(), out.logp.data() + out.logp.size());
  }

  const std::vector<double>& logprobs() const override { return logprobs_; }

  std::unique_ptr<DecoderCursor> extend(TokenId token) const override {
    if (token < 0 || static_cast<std::size_t>(token) >= ckpt_->dims.vocab_size) {
      throw DataError("decoder: token id " + std::to_string(token) + " outside the vocabulary");
    }
    return std::make_unique<Seq2SeqCursor>(ckpt_, states_, state_, token);
  }

 private:
  std::shared_ptr<const Checkpoint> ckpt_;
  std::shared_ptr<const Mat> states_;
  Vec state_;
  std::vector<double> logprobs_;
};

void validate_dims(const ModelDims& dims) {
  if (dims.vocab_size < kNumReserved + 1) {
    throw ConfigError("model: vocabulary needs at least one token beyond the reserved ids");
  }
  if (dims.dim < 1) throw ConfigError("model: dim must be positive");
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

constexpr std::string_view kMagic = "SDCKPT01";

}  // namespace

// ---------------------------------------------------------------------------

Checkpoint init_checkpoint(const ModelDims& dims, std::string vocab_digest, std::uint64_t seed) {
  validate_dims(dims);
  Checkpoint c;
  c.stage = Stage::kPretrained;
  c.dims = dims;
  c.vocab_digest = std::move(vocab_digest);
  c.params.assign(param_count(dims), 0.0);
  c.meta.seed = seed;
  Rng rng(derive_seed(seed, "init"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.dim));
  std::size_t off = 0;
  for (const auto& shape : param_manifest(dims)) {
    const std::size_t n = shape.rows * shape.cols;
    if (shape.cols > 1) {
      for (std::size_t i = 0; i < n; ++i) c.params[off + i] = rng.uniform(-scale, scale);
    }
    off += n;
  }
  return c;
}

std::string Checkpoint::serialize() const {
  if (params.size() != param_count(dims)) {
    throw ContractError("checkpoint: parameter count does not match the manifest");
  }
  nlohmann::json h;
  h["format_version"] = kFormatVersion;
  h["stage"] = std::string(to_string(stage));
  h["vocab_digest"] = vocab_digest;
  h["dims"] = {{"vocab_size", dims.vocab_size}, {"dim", dims.dim}};
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& s : param_manifest(dims)) {
    manifest.push_back({{"name", s.name}, {"shape", {s.rows, s.cols}}});
  }
  h["manifest"] = manifest;
  h["param_count"] = params.size();
  h["train_meta"] = {{"steps", meta.steps},
                     {"epochs_run", meta.epochs_run},
                     {"best_epoch", meta.best_epoch},
                     {"learning_rate", meta.learning_rate},
                     {"best_dev_bleu", meta.best_dev_bleu},
                     {"seed", meta.seed}};
  const std::string header = h.dump();
  std::string out(kMagic);
  put_u64(out, header.size());
  out += header;
  out.reserve(out.size() + 8 * params.size());
  for (double v : params) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kMagic) {
    throw DataError("checkpoint: bad magic");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw DataError("checkpoint: truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }
  Checkpoint c;
  try {
    if (h.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("checkpoint: unsupported format version");
    }
    c.stage = parse_stage(h.at("stage").get<std::string>());
    c.vocab_digest = h.at("vocab_digest").get<std::string>();
    c.dims.vocab_size = h.at("dims").at("vocab_size").get<std::size_t>();
    c.dims.dim = h.at("dims").at("dim").get<std::size_t>();
    std::vector<ParamShape> stored;
    for (const auto& m : h.at("manifest")) {
      stored.push_back({m.at("name").get<std::string>(), m.at("shape").at(0).get<std::size_t>(),
                        m.at("shape").at(1).get<std::size_t>()});
    }
    if (stored != param_manifest(c.dims)) {
      throw DataError("checkpoint: manifest does not match the model dimensions");
    }
    const auto& tm = h.at("train_meta");
    c.meta.steps = tm.at("steps").get<std::uint64_t>();
    c.meta.epochs_run = tm.at("epochs_run").get<int>();
    c.meta.best_epoch = tm.at("best_epoch").get<int>();
    c.meta.learning_rate = tm.at("learning_rate").get<double>();
    c.meta.best_dev_bleu = tm.at("best_dev_bleu").get<double>();
    c.meta.seed = tm.at("seed").get<std::uint64_t>();
    const auto n = h.at("param_count").get<std::size_t>();
    if (n != param_count(c.dims)) throw DataError("checkpoint: param_count mismatch");
    const std::size_t body = 16 + header_len;
    if (bytes.size() != body + 8 * n) throw DataError("checkpoint: truncated parameter block");
    c.params.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      c.params[i] = std::bit_cast<double>(get_u64(bytes, body + 8 * i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

Seq2SeqModel::Seq2SeqModel(std::shared_ptr<const Checkpoint> checkpoint)
    : checkpoint_(std::move(checkpoint)) {
  validate_dims(checkpoint_->dims);
  if (checkpoint_->params.size() != param_count(checkpoint_->dims)) {
    throw ContractError("model: parameter count does not match the manifest");
  }
}

Seq2SeqModel::Seq2SeqModel(Checkpoint checkpoint)
    : Seq2SeqModel(std::make_shared<const Checkpoint>(std::move(checkpoint))) {}

std::unique_ptr<DecoderCursor> Seq2SeqModel::start(const TokenSequence& source) const {
  check_ids(source, vocab_size(), 0, "source");
  const Params p = make_blocks<true>(checkpoint_->dims, checkpoint_->params.data());
  auto states = std::make_shared<const Mat>(encode(p, source, nullptr));
  const Vec init = states->col(states->cols() - 1);
  return std::make_unique<Seq2SeqCursor>(checkpoint_, std::move(states), init, kBos);
}

LossAndGradient mle_loss(const ModelDims& dims, std::span<const double> params,
                         std::span<const ExamplePair> batch) {
  validate_dims(dims);
  if (params.size() != param_count(dims)) {
    throw ContractError("mle_loss: parameter count does not match the manifest");
  }
  if (batch.empty()) throw ContractError("mle_loss: empty batch");
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    if (ex.target.empty()) {
      throw DataError("example " + std::to_string(ex.index) + ": empty target");
    }
    check_ids(ex.source, dims.vocab_size, ex.index, "source");
    check_ids(ex.target, dims.vocab_size, ex.index, "target");
    tokens += ex.target.size() + 1;
  }
  LossAndGradient out;
  out.gradient.assign(params.size(), 0.0);
  const Params p = make_blocks<true>(dims, params.data());
  Grads g = make_blocks<false>(dims, out.gradient.data());
  const double scale = 1.0 / static_cast<double>(tokens);
  double nll = 0.0;
  for (const auto& ex : batch) nll += example_loss(p, &g, ex, scale);
  out.loss = nll * scale;
  return out;
}

LossAndGradient mle_loss(const Checkpoint& checkpoint, std::span<const ExamplePair> batch) {
  return mle_loss(checkpoint.dims, checkpoint.params, batch);
}

}  // namespace selfdistill
