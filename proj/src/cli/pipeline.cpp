#include "frforge/cli/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/feedback/feedback.hpp"
#include "frforge/numeric/checkpoint.hpp"

namespace frforge::cli {

namespace fs = std::filesystem;
using models::Head;
using models::ModelKind;

fs::path RunPaths::member(ModelKind kind, std::uint64_t seed) const {
  return root / "models" / std::string(models::to_string(kind)) / ("seed" + std::to_string(seed));
}

std::uint64_t member_seed(const RunConfig& config, ModelKind kind, std::uint64_t seed) {
  return derive_seed(derive_seed(config.seed, models::to_string(kind)), seed);
}

Head detection_head(ModelKind kind) { return models::is_multitask(kind) ? Head::fr : Head::domain; }

namespace {

void require(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw ConfigError("missing " + path.string() + "; run the '" + producer + "' subcommand first");
  }
}

corpus::CorpusSpec load_spec(const RunConfig& config) {
  return config.corpus.spec_path.empty() ? corpus::default_corpus_spec() : corpus::load_corpus_spec(config.corpus.spec_path);
}

corpus::DomainId resolve_target(const corpus::CorpusSpec& spec, const std::string& name) {
  for (const auto& d : spec.domains) {
    if (d.name == name) return d.domain_id;
  }
  throw ConfigError("pipeline.target '" + name + "' is not a domain of the corpus spec");
}

struct World {
  corpus::CorpusSpec spec;
  corpus::DomainId target = 0;
  int num_domains = 0;
};

World load_world(const RunConfig& config, const RunPaths& paths) {
  require(paths.spec(), "gen-corpus");
  World w;
  w.spec = corpus::corpus_spec_from_json(Json::parse(read_text_file(paths.spec())));
  w.target = resolve_target(w.spec, config.pipeline.target);
  w.num_domains = static_cast<int>(w.spec.domains.size());
  return w;
}

nlu::PerturbationConfig load_perturbation(const RunPaths& paths) {
  require(paths.calibration(), "simulate");
  const auto j = Json::parse(read_text_file(paths.calibration()));
  return {j.at("target_bias").get<double>(), j.at("noise_sigma").get<double>(),
          j.at("perturbation_seed").get<std::uint64_t>()};
}

std::vector<models::ModelKind> detection_kinds(const RunConfig& config) {
  for (auto k : config.model.kinds) {
    if (models::is_multitask(k)) return {k};
  }
  return {config.model.kinds.back()};
}

struct Member {
  std::uint64_t seed = 0;
  models::ModelBundle bundle;
};

std::vector<Member> load_members(const RunConfig& config, const RunPaths& paths, ModelKind kind) {
  std::vector<Member> out;
  for (auto s : config.train.seeds) {
    const auto dir = paths.member(kind, s);
    require(dir / "model.json", "train");
    out.push_back({s, models::load_bundle(dir)});
  }
  return out;
}

std::vector<nlu::RoutingRecord> as_records(const std::vector<corpus::LabeledExample>& examples) {
  std::vector<nlu::RoutingRecord> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({e.utterance, e.nbest, e.routed_domain});
  return out;
}

std::string combined_digest(const std::vector<Member>& members) {
  std::uint64_t h = fnv1a64("members");
  for (const auto& m : members) h = fnv1a64(hex_digest(m.bundle.params.digest()), h);
  return hex_digest(h);
}

}  // namespace

void stage_gen_corpus(const RunConfig& config, const RunPaths& paths) {
  const auto spec = load_spec(config);
  resolve_target(spec, config.pipeline.target);
  if (config.corpus.traffic_size == 0 || config.corpus.pool_size == 0 || config.corpus.heldout_size == 0) {
    throw ConfigError("corpus traffic, pool and heldout sizes must be positive");
  }
  write_text_file(paths.spec(), corpus::corpus_spec_to_json(spec).dump(2) + "\n");
  corpus::write_corpus(paths.corpus(), corpus::generate_corpus(spec, config.corpus.size, derive_seed(config.seed, "corpus"), "u"));
  corpus::write_corpus(paths.traffic(),
                       corpus::generate_corpus(spec, config.corpus.traffic_size, derive_seed(config.seed, "traffic"), "t"));
  corpus::write_corpus(paths.pool(), corpus::generate_corpus(spec, config.corpus.pool_size, derive_seed(config.seed, "pool"), "p"));
  corpus::write_corpus(paths.heldout(),
                       corpus::generate_corpus(spec, config.corpus.heldout_size, derive_seed(config.seed, "heldout"), "h"));
  spdlog::info("generated corpus of {} utterances and {}/{}/{} traffic/pool/heldout utterances", config.corpus.size,
               config.corpus.traffic_size, config.corpus.pool_size, config.corpus.heldout_size);
}

void stage_simulate(const RunConfig& config, const RunPaths& paths) {
  for (const auto& p : {paths.corpus(), paths.traffic(), paths.pool()}) require(p, "gen-corpus");
  const auto world = load_world(config, paths);
  const auto corpus_utts = corpus::read_corpus(paths.corpus());
  auto prod_cfg = config.pipeline.production;
  prod_cfg.seed = derive_seed(config.seed, "production");
  const auto production = nlu::train_production_models(corpus_utts, world.num_domains, prod_cfg);
  nlu::save_production_models(paths.production(), production);

  const auto traffic = corpus::read_corpus(paths.traffic());
  nlu::PerturbationConfig perturbation{0.0, config.pipeline.noise_sigma, derive_seed(config.seed, "perturbation")};
  const auto cal = nlu::calibrate_target_bias(production, traffic, perturbation, config.pipeline.n, world.target,
                                              config.pipeline.false_reject_rate);
  perturbation.target_bias = cal.target_bias;
  OrderedJson cj;
  cj["target_domain"] = world.target;
  cj["requested_rate"] = config.pipeline.false_reject_rate;
  cj["achieved_rate"] = cal.achieved_rate;
  cj["target_bias"] = cal.target_bias;
  cj["iterations"] = cal.iterations;
  cj["noise_sigma"] = perturbation.noise_sigma;
  cj["perturbation_seed"] = perturbation.seed;
  cj["n"] = config.pipeline.n;
  write_text_file(paths.calibration(), cj.dump(2) + "\n");

  const auto logs = nlu::simulate(production, traffic, perturbation, config.pipeline.n, world.target);
  nlu::write_logs(paths.logs(), logs);
  const auto pool = nlu::simulate(production, corpus::read_corpus(paths.pool()), perturbation, config.pipeline.n,
                                  world.target);
  nlu::write_logs(paths.pool_logs(), pool);
  if (std::abs(cal.achieved_rate - config.pipeline.false_reject_rate) > 0.03) {
    spdlog::warn("calibrated false-reject rate {:.4f} is more than 0.03 from the requested {:.4f}", cal.achieved_rate,
                 config.pipeline.false_reject_rate);
  }
  spdlog::info("target bias {:.6g} gives false-reject rate {:.4f}; {} false rejects in logs, {} in pool",
               cal.target_bias, cal.achieved_rate, nlu::false_reject_count(logs, world.target),
               nlu::false_reject_count(pool, world.target));
}

void stage_build_dataset(const RunConfig& config, const RunPaths& paths) {
  require(paths.logs(), "simulate");
  const auto world = load_world(config, paths);
  auto dcfg = config.pipeline.dataset;
  dcfg.seed = derive_seed(config.seed, "dataset");
  const auto split = corpus::build_fr_dataset(nlu::read_logs(paths.logs()), world.target, dcfg);
  corpus::write_dataset(paths.dataset(), split);
  spdlog::info("dataset: {} train, {} valid examples", split.train.size(), split.valid.size());
}

void stage_train(const RunConfig& config, const RunPaths& paths) {
  require(paths.dataset() / "dataset.meta.json", "build-dataset");
  require(paths.corpus(), "gen-corpus");
  require(paths.logs(), "simulate");
  const auto world = load_world(config, paths);
  const auto split = corpus::read_dataset(paths.dataset());
  const auto corpus_utts = corpus::read_corpus(paths.corpus());
  const auto logs = nlu::read_logs(paths.logs());

  std::vector<std::vector<std::string>> texts;
  texts.reserve(corpus_utts.size() + logs.size());
  for (const auto& u : corpus_utts) texts.push_back(u.text);
  for (const auto& r : logs) texts.push_back(r.utterance.text);
  const auto vocab = corpus::Vocabulary::build(texts);

  models::ModelConfig base = config.model.base;
  base.transformer.vocab_size = vocab.size();
  base.lstm.vocab_size = vocab.size();
  base.fusion.num_domains = world.num_domains;
  base.target_domain = world.target;

  const bool any_transformer =
      std::any_of(config.model.kinds.begin(), config.model.kinds.end(), models::uses_transformer);
  std::optional<models::ParamStore> encoder;
  OrderedJson summary;
  if (any_transformer && config.model.pretrained) {
    std::vector<std::vector<int>> sequences;
    sequences.reserve(texts.size());
    for (const auto& t : texts) sequences.push_back(vocab.encode(t));
    auto pcfg = config.model.pretrain;
    pcfg.seed = derive_seed(config.seed, "pretrain");
    auto pre = models::pretrain_encoder(base.transformer, sequences, pcfg);
    numeric::save_checkpoint(paths.encoder(), pre.encoder, pre.steps, {{"epoch_loss", pre.epoch_loss}});
    summary["pretrain"] = {{"steps", pre.steps}, {"epoch_loss", pre.epoch_loss}};
    encoder = std::move(pre.encoder);
  }

  summary["members"] = OrderedJson::array();
  for (auto kind : config.model.kinds) {
    auto mcfg = base;
    mcfg.kind = kind;
    for (auto s : config.train.seeds) {
      auto tcfg = config.train.config;
      tcfg.seed = member_seed(config, kind, s);
      if (kind == ModelKind::bilstm && config.train.bilstm_base_lr > 0) tcfg.base_lr = config.train.bilstm_base_lr;
      auto result = detector::train(split, mcfg, vocab, encoder ? &*encoder : nullptr, tcfg);
      models::save_bundle(paths.member(kind, s), result.bundle, result.steps);
      OrderedJson m;
      m["kind"] = std::string(models::to_string(kind));
      m["seed"] = s;
      m["steps"] = result.steps;
      m["epochs"] = OrderedJson::array();
      for (const auto& e : result.log) {
        m["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", quantize_sig9(e.train_loss)},
                               {"valid_loss", quantize_sig9(e.valid_loss)}});
      }
      m["checkpoint_digest"] = hex_digest(numeric::checkpoint_digest(paths.member(kind, s)));
      summary["members"].push_back(m);
    }
  }
  write_text_file(paths.training(), summary.dump(2) + "\n");
}

void stage_detect(const RunConfig& config, const RunPaths& paths) {
  require(paths.pool_logs(), "simulate");
  const auto world = load_world(config, paths);
  const auto pool = nlu::read_logs(paths.pool_logs());
  const auto kind = detection_kinds(config).front();
  const auto members = load_members(config, paths, kind);
  if (config.detect.head == Head::fr && !models::is_multitask(kind)) {
    throw ContractError("detect.head is 'fr' but the detector kind " + std::string(models::to_string(kind)) +
                        " has no fr head");
  }
  std::size_t pool_fr = 0;
  std::unordered_map<std::string, bool> is_fr;
  for (const auto& r : pool) {
    const bool fr = r.utterance.true_domain == world.target && r.routed_domain != world.target;
    pool_fr += fr;
    is_fr.emplace(r.utterance.id, fr);
  }
  OrderedJson summary;
  summary["kind"] = std::string(models::to_string(kind));
  summary["head"] = std::string(models::to_string(config.detect.head));
  summary["threshold"] = config.detect.threshold;
  summary["pool_size"] = pool.size();
  summary["pool_false_rejects"] = pool_fr;
  summary["members"] = OrderedJson::array();
  std::vector<std::vector<detector::ScoredRecord>> member_scores;
  for (const auto& m : members) {
    auto scores = detector::score_pool(m.bundle, pool);
    const auto cands = detector::filter_candidates(scores, world.target, config.detect.threshold, config.detect.head,
                                                   config.detect.top_k);
    std::size_t hits = 0;
    for (const auto& c : cands) hits += is_fr.at(c.id);
    summary["members"].push_back({{"seed", m.seed}, {"candidates", cands.size()}, {"true_false_rejects", hits}});
    detector::write_scores(paths.member_candidates(m.seed),
                           {hex_digest(m.bundle.params.digest()), std::string(models::to_string(config.detect.head)),
                            config.detect.threshold, world.target},
                           cands);
    member_scores.push_back(std::move(scores));
  }
  const auto ensemble = detector::ensemble_scores(member_scores);
  const auto cands =
      detector::filter_candidates(ensemble, world.target, config.detect.threshold, config.detect.head, config.detect.top_k);
  std::size_t hits = 0;
  for (const auto& c : cands) hits += is_fr.at(c.id);
  summary["ensemble"] = {{"candidates", cands.size()}, {"true_false_rejects", hits}};
  const std::string digest = combined_digest(members);
  summary["model_digest"] = digest;
  detector::write_scores(paths.scores(), {digest, std::string(models::to_string(config.detect.head)), std::nullopt, world.target},
                         ensemble);
  detector::write_scores(paths.candidates(),
                         {digest, std::string(models::to_string(config.detect.head)), config.detect.threshold, world.target},
                         cands);
  write_text_file(paths.detect_summary(), summary.dump(2) + "\n");
  spdlog::info("{} candidates from a pool of {} ({} false rejects)", cands.size(), pool.size(), pool_fr);
}

eval::DetectionReport stage_evaluate(const RunConfig& config, const RunPaths& paths) {
  require(paths.dataset() / "dataset.meta.json", "build-dataset");
  require(paths.detect_summary(), "detect");
  const auto world = load_world(config, paths);
  const auto split = corpus::read_dataset(paths.dataset());
  std::vector<nlu::RoutingRecord> valid;
  if (config.eval.split == "valid") {
    valid = as_records(split.valid);
  } else {
    require(paths.pool_logs(), "simulate");
    for (auto& r : nlu::read_logs(paths.pool_logs())) {
      if (r.routed_domain != world.target) valid.push_back(std::move(r));
    }
  }
  std::vector<int> labels;
  for (const auto& r : valid) labels.push_back(r.utterance.true_domain == world.target && r.routed_domain != world.target);

  eval::DetectionReport report;
  report.threshold = config.eval.threshold;
  report.target_domain = world.target;
  report.examples = valid.size();
  report.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));

  auto evaluate_scores = [&](const std::vector<detector::ScoredRecord>& scores, Head head) {
    std::vector<int> predicted;
    std::vector<double> curve_scores;
    for (const auto& s : scores) {
      const double p = detector::score_of(s, head);
      const bool eligible = s.routed_domain != world.target;
      predicted.push_back(eligible && p >= config.eval.threshold ? 1 : 0);
      curve_scores.push_back(eligible ? p : -std::numeric_limits<double>::infinity());
    }
    const auto counts = eval::confusion_counts(predicted, labels);
    return std::make_tuple(counts, eval::prf(counts), curve_scores);
  };

  OrderedJson medians;
  std::vector<std::vector<detector::ScoredRecord>> multitask_scores;
  for (auto kind : config.model.kinds) {
    const auto members = load_members(config, paths, kind);
    const Head head = detection_head(kind);
    struct Result {
      std::uint64_t seed;
      eval::Confusion counts;
      eval::Prf metrics;
      std::vector<double> curve;
    };
    std::vector<Result> results;
    for (const auto& m : members) {
      auto scores = detector::score_pool(m.bundle, valid);
      auto [counts, metrics, curve] = evaluate_scores(scores, head);
      results.push_back({m.seed, counts, metrics, curve});
      if (models::is_multitask(kind)) multitask_scores.push_back(std::move(scores));
    }
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return results[a].metrics.f1 != results[b].metrics.f1 ? results[a].metrics.f1 < results[b].metrics.f1
                                                            : results[a].seed < results[b].seed;
    });
    const auto& med = results[order[(order.size() - 1) / 2]];
    eval::MetricRow row{std::string(models::to_string(kind)), med.counts, med.metrics, {}};
    std::vector<double> f1s;
    for (const auto& r : results) {
      row.seed_f1.push_back(r.metrics.f1);
      f1s.push_back(r.metrics.f1);
    }
    medians[row.name] = quantize_sig9(eval::median(f1s));
    report.rows.push_back(row);
    if (report.positives > 0) report.curves.emplace_back(row.name, eval::pr_curve(med.curve, labels));
  }
  if (multitask_scores.size() > 1) {
    const auto ensemble = detector::ensemble_scores(multitask_scores);
    auto [counts, metrics, curve] = evaluate_scores(ensemble, Head::fr);
    report.rows.push_back({"ensemble", counts, metrics, {}});
    if (report.positives > 0) report.curves.emplace_back("ensemble", eval::pr_curve(curve, labels));
  }
  report.extra = {{"split", config.eval.split},
                  {"median_f1", Json::parse(medians.dump())},
                  {"seeds", config.train.seeds},
                  {"train_examples", split.train.size()}};
  eval::render_report(report, paths.eval());
  spdlog::info("evaluation written to {}", paths.eval().string());
  return report;
}

namespace {

OrderedJson describe(const feedback::RetrainOutcome& o) {
  return OrderedJson{{"confirmed", o.confirmed},
                     {"heldout_target", o.heldout_target},
                     {"false_rejects_before", o.heldout_fr_before},
                     {"false_rejects_after", o.heldout_fr_after},
                     {"relative_reduction", quantize_sig9(o.relative_reduction())},
                     {"production_digest_before", hex_digest(o.production_digest_before)},
                     {"production_digest_after", hex_digest(o.production_digest_after)}};
}

}  // namespace

Json stage_feedback(const RunConfig& config, const RunPaths& paths) {
  require(paths.candidates(), "detect");
  require(paths.pool_logs(), "simulate");
  require(paths.production(), "simulate");
  require(paths.heldout(), "gen-corpus");
  const auto world = load_world(config, paths);
  const auto [header, candidates] = detector::read_scores(paths.candidates());
  const auto pool = nlu::read_logs(paths.pool_logs());
  const auto kind = detection_kinds(config).front();
  const auto members = load_members(config, paths, kind);
  const auto digest_before = combined_digest(members);
  if (digest_before != header.model_digest) {
    throw ContractError("candidates were produced by a different detector (" + header.model_digest + " vs " +
                        digest_before + ")");
  }

  std::unordered_map<std::string, const nlu::RoutingRecord*> by_id;
  std::size_t pool_fr = 0;
  for (const auto& r : pool) {
    by_id.emplace(r.utterance.id, &r);
    pool_fr += r.utterance.true_domain == world.target && r.routed_domain != world.target;
  }
  const auto production = nlu::load_production_models(paths.production());
  const auto perturbation = load_perturbation(paths);
  const auto corpus_utts = corpus::read_corpus(paths.corpus());
  const auto heldout = corpus::read_corpus(paths.heldout());
  feedback::RetrainConfig rcfg;
  rcfg.production = config.pipeline.production;
  rcfg.production.seed = derive_seed(config.seed, "production");
  rcfg.production.epochs = config.feedback.retrain_epochs;
  rcfg.production.learning_rate = config.feedback.retrain_learning_rate;
  rcfg.warm_start = config.feedback.warm_start;
  const auto oracle_seed = derive_seed(config.seed, "oracle");

  // One review round: enrichment of the reviewed candidates and, given
  // enough confirmed false rejects, the retraining outcome.
  auto round = [&](const std::vector<detector::ScoredRecord>& cands, const std::vector<feedback::Annotation>& notes) {
    std::set<std::string> ids;
    for (const auto& c : cands) ids.insert(c.id);
    std::vector<corpus::Utterance> confirmed;
    std::size_t reviewed = 0;
    std::size_t confirmed_in_candidates = 0;
    for (const auto& a : notes) {
      auto it = by_id.find(a.id);
      if (it == by_id.end()) throw ContractError("annotation for unknown record " + a.id);
      reviewed += ids.contains(a.id);
      if (a.verdict != feedback::Verdict::fr) continue;
      confirmed.push_back(it->second->utterance);
      confirmed_in_candidates += ids.contains(a.id);
    }
    OrderedJson r;
    r["candidates"] = cands.size();
    r["reviewed"] = reviewed;
    r["confirmed"] = confirmed.size();
    r["enrichment"] = reviewed == 0 || pool_fr == 0
                          ? OrderedJson(nullptr)
                          : OrderedJson(quantize_sig9(
                                feedback::enrichment_factor(confirmed_in_candidates, reviewed, pool_fr, pool.size())));
    std::optional<feedback::RetrainOutcome> outcome;
    if (confirmed.size() >= config.feedback.min_confirmed && !confirmed.empty()) {
      outcome = feedback::retrain_and_measure(production, corpus_utts, confirmed, heldout, perturbation,
                                              config.pipeline.n, world.target, rcfg);
      r["retrained"] = describe(*outcome);
    } else {
      r["retrained"] = nullptr;
    }
    return std::make_tuple(r, confirmed, outcome);
  };

  auto notes = feedback::read_annotations(paths.annotations());
  std::set<std::string> annotated;
  for (const auto& a : notes) annotated.insert(a.id);
  std::vector<detector::ScoredRecord> pending;
  for (const auto& c : candidates) {
    if (!annotated.contains(c.id)) pending.push_back(c);
  }
  const auto fresh = feedback::oracle_annotate(pending, pool, world.target, config.feedback.oracle_error_rate, oracle_seed);
  feedback::append_annotations(paths.annotations(), fresh);
  notes.insert(notes.end(), fresh.begin(), fresh.end());

  OrderedJson out;
  out["detector_kind"] = std::string(models::to_string(kind));
  out["pool_size"] = pool.size();
  out["pool_false_rejects"] = pool_fr;
  out["pool_prevalence"] = quantize_sig9(static_cast<double>(pool_fr) / static_cast<double>(pool.size()));
  out["min_confirmed"] = config.feedback.min_confirmed;
  auto [ensemble_round, confirmed, outcome] = round(candidates, notes);
  out["ensemble"] = ensemble_round;
  if (outcome) {
    nlu::save_production_models(paths.retrained_production(), outcome->retrained);
    auto control_cfg = rcfg;
    control_cfg.production.learning_rate = 0.0;
    out["zero_lr_control"] = describe(feedback::retrain_and_measure(production, corpus_utts, confirmed, heldout,
                                                                    perturbation, config.pipeline.n, world.target,
                                                                    control_cfg));
  } else {
    spdlog::warn("{} confirmed false rejects; retraining needs {}", confirmed.size(), config.feedback.min_confirmed);
    out["zero_lr_control"] = nullptr;
  }

  out["members"] = OrderedJson::array();
  std::vector<double> enrichments;
  std::vector<double> reductions;
  for (const auto& m : members) {
    const auto cands = detector::read_scores(paths.member_candidates(m.seed)).second;
    const auto member_notes = feedback::oracle_annotate(cands, pool, world.target, config.feedback.oracle_error_rate,
                                                        oracle_seed);
    auto [r, member_confirmed, member_outcome] = round(cands, member_notes);
    r["seed"] = m.seed;
    if (!r["enrichment"].is_null()) enrichments.push_back(r["enrichment"].get<double>());
    if (member_outcome) {
      reductions.push_back(static_cast<double>(member_outcome->heldout_fr_before) -
                           static_cast<double>(member_outcome->heldout_fr_after));
    }
    out["members"].push_back(r);
  }
  out["median_member_enrichment"] = enrichments.empty() ? OrderedJson(nullptr) : OrderedJson(eval::median(enrichments));
  out["median_member_fr_reduction"] = reductions.size() == members.size() && !reductions.empty()
                                          ? OrderedJson(eval::median(reductions))
                                          : OrderedJson(nullptr);
  out["detector_digest"] = digest_before;
  out["detector_unchanged"] = combined_digest(load_members(config, paths, kind)) == digest_before;
  write_text_file(paths.feedback_report(), out.dump(2) + "\n");
  return Json::parse(out.dump());
}

OrderedJson artifact_digests(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  }
  std::sort(files.begin(), files.end());
  OrderedJson out = OrderedJson::object();
  for (const auto& f : files) {
    if (f == "run_manifest.json") continue;
    out[f.generic_string()] = hex_digest(fnv1a64(read_text_file(root / f)));
  }
  return out;
}

void run_all(const RunConfig& config, const RunPaths& paths) {
  stage_gen_corpus(config, paths);
  stage_simulate(config, paths);
  stage_build_dataset(config, paths);
  stage_train(config, paths);
  stage_detect(config, paths);
  stage_evaluate(config, paths);
  stage_feedback(config, paths);
  OrderedJson manifest;
  manifest["seed"] = config.seed;
  manifest["config"] = run_config_to_json(config);
  manifest["checkpoints"] = OrderedJson::object();
  for (auto kind : config.model.kinds) {
    for (auto s : config.train.seeds) {
      const auto dir = paths.member(kind, s);
      manifest["checkpoints"][fs::relative(dir, paths.root).generic_string()] =
          hex_digest(numeric::checkpoint_digest(dir));
    }
  }
  manifest["artifacts"] = artifact_digests(paths.root);
  write_text_file(paths.manifest(), manifest.dump(2) + "\n");
}

}  // namespace frforge::cli
