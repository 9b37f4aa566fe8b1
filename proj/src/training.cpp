#include "ddg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "ddg/theory.hpp"

#include "ddg/optim.hpp"
#include "ddg/serialize.hpp"

namespace ddg {

namespace {

constexpr std::uint64_t kModelStream = 0x4d4f44454cULL;    // "MODEL"
constexpr std::uint64_t kCodebookStream = 0x434f4445ULL;   // "CODE"
constexpr std::uint64_t kEpochStream = 0x45504f4348ULL;    // "EPOCH"
constexpr std::uint64_t kLooStream = 0x4c4f4fULL;          // "LOO"
constexpr std::uint64_t kAblateStream = 0x41424c54ULL;     // "ABLT"

std::vector<int> source_domains(const RunConfig& cfg) {
  std::vector<int> out;
  for (int d = 0; d < cfg.manifest.domains; ++d)
    if (d != cfg.target_domain) out.push_back(d);
  return out;
}

Codebook clone_codebook(const Codebook& cb) {
  Codebook out = cb;
  out.codewords = make_tensor(cb.codewords->shape, cb.codewords->values,
                              cb.codewords->requires_grad);
  return out;
}

double batch_accuracy(const ModelConfig& mc, const ModelParams& params,
                      const Codebook* cb, const DomainDataset& dataset,
                      const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const std::size_t chunk = 64;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const std::size_t end = std::min(indices.size(), start + chunk);
    std::vector<const std::vector<double>*> images;
    images.reserve(end - start);
    for (std::size_t i = start; i < end; ++i)
      images.push_back(&dataset.samples[indices[i]].image);
    auto res = forward_pass(mc, images, params, cb);
    const int classes = mc.classes;
    for (std::size_t i = start; i < end; ++i) {
      const double* row = res.logits->values.data() + (i - start) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;  // ties keep the lowest class
      if (best == dataset.samples[indices[i]].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

void serialize_config(BinaryWriter& w, const RunConfig& c) {
  w.u64(c.manifest.seed);
  w.u32(c.manifest.classes);
  w.u32(c.manifest.domains);
  w.u32(c.manifest.samples_per_domain);
  w.u32(c.manifest.image_side);
  w.u32(c.manifest.patch_size);
  w.u32(static_cast<std::uint32_t>(c.specs.size()));
  for (const auto& s : c.specs) {
    w.u32(s.domain_id);
    w.f64(s.gain);
    w.f64(s.bias);
    w.f64(s.noise_amplitude);
    w.u32(s.pattern);
  }
  w.u32(c.target_domain);
  w.u32(c.iterations);
  w.u32(c.batch_size);
  w.f64(c.lr);
  w.f64(c.momentum);
  w.f64(c.weight_decay);
  w.f64(c.lr_decay_at);
  w.f64(c.lr_decay_factor);
  w.f64(c.weights.alpha);
  w.f64(c.weights.beta);
  w.f64(c.weights.eta);
  w.f64(c.weights.temperature);
  w.u8(c.quantize ? 1 : 0);
  w.u32(c.codebook_size);
  w.f64(c.codebook_gamma);
  w.u8(static_cast<std::uint8_t>(c.codebook_mode));
  w.u32(c.hidden);
  w.u32(c.feature_dim);
  w.f64(c.teacher_decay);
  w.f64(c.val_fraction);
  w.u32(c.val_interval);
  w.u64(c.seed);
}

RunConfig deserialize_config(BinaryReader& r) {
  RunConfig c;
  c.manifest.seed = r.u64();
  c.manifest.classes = static_cast<int>(r.u32());
  c.manifest.domains = static_cast<int>(r.u32());
  c.manifest.samples_per_domain = static_cast<int>(r.u32());
  c.manifest.image_side = static_cast<int>(r.u32());
  c.manifest.patch_size = static_cast<int>(r.u32());
  c.specs.resize(r.u32());
  for (auto& s : c.specs) {
    s.domain_id = static_cast<int>(r.u32());
    s.gain = r.f64();
    s.bias = r.f64();
    s.noise_amplitude = r.f64();
    s.pattern = static_cast<int>(r.u32());
  }
  c.target_domain = static_cast<int>(r.u32());
  c.iterations = static_cast<int>(r.u32());
  c.batch_size = static_cast<int>(r.u32());
  c.lr = r.f64();
  c.momentum = r.f64();
  c.weight_decay = r.f64();
  c.lr_decay_at = r.f64();
  c.lr_decay_factor = r.f64();
  c.weights.alpha = r.f64();
  c.weights.beta = r.f64();
  c.weights.eta = r.f64();
  c.weights.temperature = r.f64();
  c.quantize = r.u8() != 0;
  c.codebook_size = static_cast<int>(r.u32());
  c.codebook_gamma = r.f64();
  c.codebook_mode = static_cast<CodebookMode>(r.u8());
  c.hidden = static_cast<int>(r.u32());
  c.feature_dim = static_cast<int>(r.u32());
  c.teacher_decay = r.f64();
  c.val_fraction = r.f64();
  c.val_interval = static_cast<int>(r.u32());
  c.seed = r.u64();
  return c;
}

void write_params(BinaryWriter& w, const ModelParams& p) {
  for (const auto& t : p.all()) w.f64_array(t->values);
}

void read_params(BinaryReader& r, ModelParams& p) {
  for (const auto& t : p.all()) {
    auto vals = r.f64_array();
    if (vals.size() != t->values.size())
      throw std::runtime_error("checkpoint: parameter size mismatch");
    t->values = std::move(vals);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (lr_decay_at <= 0.0 || lr_decay_at > 1.0)
    throw std::invalid_argument("config: lr_decay_at must lie in (0,1]");
  if (target_domain < 0 || target_domain >= manifest.domains)
    throw std::invalid_argument("config: target_domain out of range");
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("config: val_fraction must lie in (0,1)");
  if (val_interval < 1) throw std::invalid_argument("config: val_interval must be >= 1");
  if (weights.temperature <= 0.0)
    throw std::invalid_argument("config: temperature must be positive");
  if (static_cast<int>(specs.size()) != manifest.domains)
    throw std::invalid_argument("config: one DomainSpec per domain required");
  if (quantize && weights.beta != 0.0 && codebook_size < 1)
    throw std::invalid_argument("config: codebook_size must be >= 1");
  if (!quantize && weights.beta != 0.0)
    throw std::invalid_argument("config: commitment weight requires quantization");
}

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  BinaryWriter w;
  w.magic("DDGCKP01");
  w.u32(ckpt.version);
  serialize_config(w, ckpt.config);
  write_params(w, ckpt.student);
  w.f64(ckpt.teacher.decay);
  write_params(w, ckpt.teacher.params);
  const Codebook& cb = ckpt.codebook;
  w.u32(cb.num_codewords);
  w.u32(cb.dim);
  w.f64(cb.gamma);
  w.u8(static_cast<std::uint8_t>(cb.mode));
  w.u8(cb.resurrect_dead ? 1 : 0);
  w.f64_array(cb.codewords->values);
  w.f64_array(cb.ema_counts);
  w.f64_array(cb.ema_sums);
  w.u64(ckpt.iteration);
  w.f64(ckpt.best_val_accuracy);
  return w.bytes();
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  BinaryReader r(bytes);
  r.expect_magic("DDGCKP01");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != 1) throw std::runtime_error("unsupported checkpoint version");
  ckpt.config = deserialize_config(r);
  const ModelConfig mc = ckpt.config.model_config();
  ckpt.student = init_model(mc, 0, /*requires_grad=*/false);
  read_params(r, ckpt.student);
  const double decay = r.f64();
  ckpt.teacher = init_teacher(ckpt.student, decay);
  read_params(r, ckpt.teacher.params);
  Codebook cb;
  cb.num_codewords = static_cast<int>(r.u32());
  cb.dim = static_cast<int>(r.u32());
  cb.gamma = r.f64();
  cb.mode = static_cast<CodebookMode>(r.u8());
  cb.resurrect_dead = r.u8() != 0;
  auto cw = r.f64_array();
  cb.codewords = make_tensor({cb.num_codewords, cb.dim}, std::move(cw), false);
  cb.ema_counts = r.f64_array();
  cb.ema_sums = r.f64_array();
  ckpt.codebook = std::move(cb);
  ckpt.iteration = r.u64();
  ckpt.best_val_accuracy = r.f64();
  if (!r.at_end()) throw std::runtime_error("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  in.read(bytes.data(), size);
  if (!in) throw std::runtime_error("read failed: " + path);
  return deserialize_checkpoint(bytes);
}

std::uint64_t config_hash(const RunConfig& config) {
  BinaryWriter w;
  serialize_config(w, config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : w.bytes()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

TrainResult train(const RunConfig& config, const DomainDataset& dataset,
                  const std::function<void(const Checkpoint&)>& on_snapshot) {
  config.validate();
  if (dataset.manifest.domains != config.manifest.domains ||
      dataset.manifest.classes != config.manifest.classes)
    throw std::invalid_argument("train: dataset does not match config manifest");

  const ModelConfig mc = config.model_config();
  const auto sources = source_domains(config);
  const SplitIndices split =
      split_train_val(dataset, sources, config.val_fraction, config.seed);
  // hard leakage check: no target-domain sample on either side
  for (const auto* side : {&split.train, &split.val})
    for (int idx : *side)
      if (dataset.samples[idx].domain == config.target_domain)
        throw std::runtime_error("train: target-domain sample leaked into training data");

  ModelParams student = init_model(mc, Rng::derive(config.seed, kModelStream));
  TeacherState teacher = init_teacher(student, config.teacher_decay);
  Codebook cb = init_codebook(config.codebook_size, config.feature_dim,
                              config.codebook_gamma, config.codebook_mode,
                              Rng::derive(config.seed, kCodebookStream));
  const Codebook* cb_ptr = config.quantize ? &cb : nullptr;

  std::vector<TensorPtr> params = student.all();
  if (config.quantize && cb.mode == CodebookMode::kSgdVq)
    params.push_back(cb.codewords);
  SgdOptimizer optimizer(params, config.lr, config.momentum, config.weight_decay);

  const int decay_step = std::max(
      1, static_cast<int>(std::llround(config.lr_decay_at * config.iterations)));

  TrainResult result;
  Batches batches({}, config.batch_size, 0);
  std::uint64_t epoch = 0;
  std::vector<int> batch_indices;
  bool have_batch = false;

  auto snapshot = [&](std::uint64_t iter, double val_acc) {
    Checkpoint ck;
    ck.config = config;
    ck.student = clone_params(student, false);
    ck.teacher.decay = teacher.decay;
    ck.teacher.params = clone_params(teacher.params, false);
    ck.codebook = clone_codebook(cb);
    ck.iteration = iter;
    ck.best_val_accuracy = val_acc;
    if (on_snapshot) on_snapshot(ck);
    result.checkpoint = std::move(ck);
  };

  double best_val = -1.0;
  for (int step = 1; step <= config.iterations; ++step) {
    // next batch, reshuffling per epoch
    have_batch = batches.next(batch_indices);
    if (!have_batch) {
      batches = Batches(split.train, config.batch_size,
                        Rng::derive(Rng::derive(config.seed, kEpochStream), epoch++));
      batches.next(batch_indices);
    }

    std::vector<const std::vector<double>*> images;
    std::vector<int> labels;
    images.reserve(batch_indices.size());
    for (int idx : batch_indices) {
      const Sample& s = dataset.samples[idx];
      if (s.domain == config.target_domain)
        throw std::runtime_error("train: target-domain sample in batch");
      images.push_back(&s.image);
      labels.push_back(s.label);
    }

    auto res = forward_pass(mc, images, student, cb_ptr);

    TensorPtr teacher_logits;
    if (config.weights.alpha != 0.0)
      teacher_logits = forward_pass(mc, images, teacher.params, cb_ptr).logits;

    TensorPtr comm;
    const bool use_comm = config.quantize && config.weights.beta != 0.0;
    if (use_comm) comm = commitment_loss(res.features, res.quantized->values);

    auto loss = total_loss(res.logits, teacher_logits, labels, comm, config.weights);
    if (config.quantize && cb.mode == CodebookMode::kSgdVq) {
      auto l_vq = vq_loss_sgd(cb, res.features->values, res.assignments);
      loss = add(loss, l_vq);
      // the eta-weighted commitment of the discretization objective follows
      // the commitment toggle
      if (use_comm) loss = add(loss, scale(comm, config.weights.eta));
    }

    if (!std::isfinite(loss->values[0]))
      throw std::runtime_error("train: NaN loss at iteration " + std::to_string(step));

    backward(loss);
    optimizer.step();
    optimizer.zero_grad();

    if (config.quantize && cb.mode == CodebookMode::kEma)
      ema_update(cb, res.features->values.data(), res.features->shape[0],
                 res.assignments);
    teacher_ema_update(teacher, student);

    if (step == decay_step)
      optimizer.set_lr(optimizer.lr() * config.lr_decay_factor);

    if (step % config.val_interval == 0 || step == config.iterations) {
      const double val_acc = batch_accuracy(mc, student, cb_ptr, dataset, split.val);
      if (val_acc > best_val) {
        best_val = val_acc;
        snapshot(static_cast<std::uint64_t>(step), val_acc);
      }
      TrainLogEntry entry;
      entry.iteration = step;
      entry.loss = loss->values[0];
      entry.l_comm = comm ? comm->values[0] : 0.0;
      {
        auto logits_const = make_tensor(res.logits->shape, res.logits->values, false);
        entry.l_cla = cross_entropy_batch(logits_const, labels)->values[0];
        entry.l_con =
            teacher_logits
                ? kl_consistency_batch(logits_const, teacher_logits,
                                       config.weights.temperature)->values[0]
                : 0.0;
      }
      entry.val_accuracy = val_acc;
      entry.perplexity =
          config.quantize ? codeword_stats(res.assignments, cb.num_codewords).perplexity
                          : 0.0;
      result.log.push_back(entry);
    }
  }
  return result;
}

double evaluate(const Checkpoint& ckpt, const DomainDataset& dataset,
                const std::vector<int>& indices) {
  if (dataset.manifest.classes != ckpt.config.manifest.classes)
    throw std::invalid_argument("evaluate: class count mismatch");
  const ModelConfig mc = ckpt.config.model_config();
  const Codebook* cb = ckpt.config.quantize ? &ckpt.codebook : nullptr;
  return batch_accuracy(mc, ckpt.student, cb, dataset, indices);
}

std::vector<double> evaluate_per_domain(const Checkpoint& ckpt,
                                        const DomainDataset& dataset) {
  std::vector<double> out;
  for (int d = 0; d < dataset.manifest.domains; ++d) {
    std::vector<int> indices;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
      if (dataset.samples[i].domain == d) indices.push_back(static_cast<int>(i));
    out.push_back(evaluate(ckpt, dataset, indices));
  }
  return out;
}

LooResult leave_one_out(const RunConfig& config_template, const DomainDataset& dataset,
                        int jobs) {
  if (config_template.manifest.domains < 3)
    throw std::invalid_argument("leave_one_out: need at least 3 domains");
  const int m = config_template.manifest.domains;
  LooResult result;
  result.runs.resize(m);

  std::vector<std::exception_ptr> errors(m);
  auto run_one = [&](int target) {
    try {
      RunConfig cfg = config_template;
      cfg.target_domain = target;
      cfg.seed = Rng::derive(Rng::derive(config_template.seed, kLooStream),
                             static_cast<std::uint64_t>(target));
      TrainResult tr = train(cfg, dataset);
      std::vector<int> target_indices;
      for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        if (dataset.samples[i].domain == target)
          target_indices.push_back(static_cast<int>(i));
      LooRun& out = result.runs[target];
      out.target_domain = target;
      out.best_val_accuracy = tr.checkpoint.best_val_accuracy;
      out.target_accuracy = evaluate(tr.checkpoint, dataset, target_indices);
      out.checkpoint = std::move(tr.checkpoint);
    } catch (...) {
      errors[target] = std::current_exception();
    }
  };

  jobs = std::clamp(jobs, 1, m);
  if (jobs == 1) {
    for (int d = 0; d < m; ++d) run_one(d);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (int d = next.fetch_add(1); d < m; d = next.fetch_add(1)) run_one(d);
      });
    for (auto& t : workers) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> accs;
  for (const auto& run : result.runs) accs.push_back(run.target_accuracy);
  double sum = 0.0;
  for (double a : accs) sum += a;
  result.average = sum / static_cast<double>(m);
  result.gs = gs_metric(accs);
  return result;
}

std::vector<AblationRow> ablation_rows() {
  std::vector<AblationRow> rows(6);
  rows[0] = {"I", "no discretization (ERM)", false, false, CodebookMode::kFrozen, {}, 0.0};
  rows[1] = {"II", "commitment only, frozen codebook", true, true, CodebookMode::kFrozen, {}, 0.0};
  rows[2] = {"III", "VQ loss via SGD", true, false, CodebookMode::kSgdVq, {}, 0.0};
  rows[3] = {"IV", "EMA codebook", true, false, CodebookMode::kEma, {}, 0.0};
  rows[4] = {"V", "commitment + SGD-VQ", true, true, CodebookMode::kSgdVq, {}, 0.0};
  rows[5] = {"VI", "commitment + EMA (full DDG)", true, true, CodebookMode::kEma, {}, 0.0};
  return rows;
}

RunConfig apply_ablation_row(const RunConfig& config_template, const AblationRow& row) {
  RunConfig cfg = config_template;
  cfg.quantize = row.quantize;
  cfg.codebook_mode = row.mode;
  if (!row.commitment) cfg.weights.beta = 0.0;
  if (row.id == "I") cfg.weights.alpha = 0.0;  // plain ERM baseline
  return cfg;
}

std::vector<AblationRow> ablate(const RunConfig& config_template,
                                const DomainDataset& dataset, int seeds, int jobs) {
  if (seeds < 1) throw std::invalid_argument("ablate: need at least one seed");
  auto rows = ablation_rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
      RunConfig cfg = apply_ablation_row(config_template, rows[r]);
      cfg.seed = Rng::derive(Rng::derive(config_template.seed, kAblateStream),
                             r * 1000ULL + static_cast<std::uint64_t>(s));
      const LooResult loo = leave_one_out(cfg, dataset, jobs);
      rows[r].per_seed_target_accuracy.push_back(loo.average);
      sum += loo.average;
    }
    rows[r].mean_target_accuracy = sum / seeds;
  }
  return rows;
}

}  // namespace ddg
