#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feffect/corpus.hpp"
#include "feffect/estimators.hpp"
#include "feffect/evalx.hpp"
#include "feffect/feag.hpp"
#include "feffect/features.hpp"
#include "feffect/models.hpp"

namespace py = pybind11;
using namespace feffect;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal text-feature effect estimation and effect-controlled training.";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<SchemaError>(m, "SchemaError");
  py::register_exception<SplitError>(m, "SplitError");
  py::register_exception<GenerationError>(m, "GenerationError");
  py::register_exception<ConsistencyError>(m, "ConsistencyError");
  py::register_exception<TrainingError>(m, "TrainingError");
  py::register_exception<InfeasibleError>(m, "InfeasibleError");

  py::class_<Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("tokens", &Document::tokens)
      .def_readwrite("treatment", &Document::treatment)
      .def_readwrite("label", &Document::label)
      .def_readwrite("confounder", &Document::confounder)
      .def_readwrite("doc_id", &Document::doc_id)
      .def("__repr__", [](const Document& d) {
        return "Document(t=" + std::to_string(d.treatment) + ", y=" + std::to_string(d.label) +
               ", tokens=" + std::to_string(d.tokens.size()) + ")";
      });

  py::enum_<Generator>(m, "Generator")
      .value("ss", Generator::ss)
      .value("subsampled", Generator::subsampled)
      .value("external", Generator::external);

  py::class_<CorpusMeta>(m, "CorpusMeta")
      .def(py::init<>())
      .def_readwrite("true_tau", &CorpusMeta::true_tau)
      .def_readwrite("overlap_eps", &CorpusMeta::overlap_eps)
      .def_readwrite("generator", &CorpusMeta::generator)
      .def_readwrite("seed", &CorpusMeta::seed);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_readwrite("docs", &Corpus::docs)
      .def_readwrite("meta", &Corpus::meta)
      .def("__len__", &Corpus::size);

  py::class_<VocabConfig>(m, "VocabConfig")
      .def(py::init<>())
      .def_readwrite("w1_pool", &VocabConfig::w1_pool)
      .def_readwrite("w0_pool", &VocabConfig::w0_pool)
      .def_readwrite("neutral_pool", &VocabConfig::neutral_pool)
      .def_readwrite("treated_token", &VocabConfig::treated_token)
      .def_readwrite("untreated_token", &VocabConfig::untreated_token);
  m.def("default_vocab", &default_vocab);

  py::class_<EffectTokenConfig>(m, "EffectTokenConfig")
      .def(py::init<>())
      .def_readwrite("token", &EffectTokenConfig::token)
      .def_readwrite("delta", &EffectTokenConfig::delta)
      .def_readwrite("p_present", &EffectTokenConfig::p_present);

  py::class_<GenConfigSS>(m, "GenConfigSS")
      .def(py::init<>())
      .def_readwrite("n", &GenConfigSS::n)
      .def_readwrite("tau", &GenConfigSS::tau)
      .def_readwrite("eps", &GenConfigSS::eps)
      .def_readwrite("signal_strength", &GenConfigSS::signal_strength)
      .def_readwrite("base_label_acc", &GenConfigSS::base_label_acc)
      .def_readwrite("tokens_per_doc", &GenConfigSS::tokens_per_doc)
      .def_readwrite("vocab", &GenConfigSS::vocab)
      .def_readwrite("effect_token", &GenConfigSS::effect_token)
      .def("validate", &GenConfigSS::validate);

  py::class_<GenConfigSub>(m, "GenConfigSub")
      .def(py::init<>())
      .def_readwrite("n_raw", &GenConfigSub::n_raw)
      .def_readwrite("trigger_token", &GenConfigSub::trigger_token)
      .def_readwrite("keep_t1_w0", &GenConfigSub::keep_t1_w0)
      .def_readwrite("keep_t0", &GenConfigSub::keep_t0)
      .def_readwrite("p_trigger_w1", &GenConfigSub::p_trigger_w1)
      .def_readwrite("p_trigger_w0", &GenConfigSub::p_trigger_w0)
      .def_readwrite("signal_strength", &GenConfigSub::signal_strength)
      .def_readwrite("base_label_acc", &GenConfigSub::base_label_acc)
      .def_readwrite("tokens_per_doc", &GenConfigSub::tokens_per_doc)
      .def_readwrite("vocab", &GenConfigSub::vocab)
      .def("validate", &GenConfigSub::validate);

  m.def("generate_ss", &generate_ss, py::arg("cfg"), py::arg("seed"));
  m.def("generate_subsampled", &generate_subsampled, py::arg("cfg"), py::arg("seed"));
  m.def("read_jsonl", py::overload_cast<const std::string&>(&read_jsonl), py::arg("path"));
  m.def("write_jsonl",
        py::overload_cast<const Corpus&, const std::string&>(&write_jsonl), py::arg("corpus"),
        py::arg("path"));
  m.def(
      "split",
      [](const Corpus& c, double f_train, double f_heldout, double f_test, std::int64_t seed) {
        SplitResult r = split(c, f_train, f_heldout, f_test, seed);
        return py::make_tuple(std::move(r.train), std::move(r.heldout), std::move(r.test));
      },
      py::arg("corpus"), py::arg("f_train"), py::arg("f_heldout"), py::arg("f_test"),
      py::arg("seed"));

  py::class_<FeatureSpec>(m, "FeatureSpec")
      .def_static("prefix", &FeatureSpec::make_prefix, py::arg("feature_id"), py::arg("treated"),
                  py::arg("untreated"))
      .def_static("presence", &FeatureSpec::make_presence, py::arg("feature_id"),
                  py::arg("trigger"))
      .def_static("parse", &FeatureSpec::parse, py::arg("feature_id"), py::arg("text"))
      .def_readonly("feature_id", &FeatureSpec::feature_id)
      .def_property_readonly("is_prefix", &FeatureSpec::is_prefix)
      .def("__str__", &FeatureSpec::to_string)
      .def("__repr__", [](const FeatureSpec& s) { return "FeatureSpec(" + s.to_string() + ")"; });

  py::class_<FeaturizerConfig> fc(m, "FeaturizerConfig");
  py::enum_<FeaturizerConfig::TfMode>(fc, "TfMode")
      .value("binary", FeaturizerConfig::TfMode::binary)
      .value("counts", FeaturizerConfig::TfMode::counts);
  fc.def(py::init<>())
      .def_readwrite("dim", &FeaturizerConfig::dim)
      .def_readwrite("hash_seed", &FeaturizerConfig::hash_seed)
      .def_readwrite("tf_mode", &FeaturizerConfig::tf_mode);

  m.def(
      "featurize",
      [](const Document& d, const FeaturizerConfig& cfg) {
        const SparseVec v = featurize(d, cfg);
        return v.entries;
      },
      py::arg("doc"), py::arg("cfg") = FeaturizerConfig{});
  m.def("hash_token", &hash_token, py::arg("token"), py::arg("hash_seed"), py::arg("dim"));
  m.def("apply_counterfactual", &apply_counterfactual, py::arg("doc"), py::arg("spec"));
  m.def("with_feature_forced", &with_feature_forced, py::arg("doc"), py::arg("spec"),
        py::arg("t"));
  m.def("strip_feature_tokens", &strip_feature_tokens, py::arg("doc"), py::arg("spec"));
  m.def("group_of", &group_of, py::arg("doc"));

  py::enum_<ModelMode>(m, "ModelMode")
      .value("linear", ModelMode::linear)
      .value("mlp", ModelMode::mlp);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lambda_rr", &TrainConfig::lambda_rr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("eps_clip", &TrainConfig::eps_clip)
      .def_readwrite("mode", &TrainConfig::mode)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("select_best", &TrainConfig::select_best);

  py::class_<TwoHeadModel>(m, "TwoHeadModel")
      .def_property_readonly("mode", [](const TwoHeadModel& mm) { return mm.mode; })
      .def_property_readonly("spec", [](const TwoHeadModel& mm) { return mm.spec; })
      .def("predict_outcome",
           [](const TwoHeadModel& mm, const Document& d) { return predict_outcome(mm, d); })
      .def("predict_riesz",
           [](const TwoHeadModel& mm, const Document& d) { return predict_riesz(mm, d); })
      .def("params", [](const TwoHeadModel& mm) { return flat_params(mm); });

  py::class_<PropensityModel>(m, "PropensityModel")
      .def("predict",
           [](const PropensityModel& mm, const Document& d) { return predict_propensity(mm, d); });

  py::class_<Classifier>(m, "Classifier")
      .def("predict", &Classifier::predict, py::arg("doc"))
      .def_property_readonly("model", [](const Classifier& c) { return c.model; })
      .def_property_readonly("input_strip", [](const Classifier& c) { return c.input_strip; });

  m.def("riesz_loss", &riesz_loss, py::arg("model"), py::arg("batch"), py::arg("spec"));
  m.def("bce_loss", &bce_loss, py::arg("model"), py::arg("batch"));
  m.def("train_two_head", &train_two_head, py::arg("train"), py::arg("spec"), py::arg("cfg"),
        py::arg("featurizer") = FeaturizerConfig{},
        py::arg("heldout") = static_cast<const Corpus*>(nullptr));
  m.def("train_propensity", &train_propensity, py::arg("train"), py::arg("spec"), py::arg("cfg"),
        py::arg("featurizer") = FeaturizerConfig{});
  m.def("train_classifier", &train_classifier, py::arg("train"), py::arg("cfg"),
        py::arg("featurizer") = FeaturizerConfig{},
        py::arg("heldout") = static_cast<const Corpus*>(nullptr));
  m.def("save_classifier", &save_classifier, py::arg("classifier"), py::arg("path"));
  m.def("load_classifier", &load_classifier, py::arg("path"));

  m.def("ate_direct",
        py::overload_cast<const TwoHeadModel&, const Corpus&, const FeatureSpec&>(&ate_direct),
        py::arg("model"), py::arg("eval"), py::arg("spec"));
  m.def("ate_direct_fn",
        py::overload_cast<const OutcomeFn&, const Corpus&, const FeatureSpec&>(&ate_direct),
        py::arg("outcome"), py::arg("eval"), py::arg("spec"));
  m.def("multiplier_propensity", &multiplier_propensity, py::arg("pmodel"), py::arg("doc"),
        py::arg("eps_clip"));
  m.def("ate_dr", &ate_dr, py::arg("outcome"), py::arg("multiplier"), py::arg("eval"),
        py::arg("spec"));
  m.def("ate_dr_propensity", &ate_dr_propensity, py::arg("g"), py::arg("pmodel"), py::arg("eval"),
        py::arg("spec"), py::arg("eps_clip"), py::arg("self_normalize") = false);
  m.def("ate_dr_riesz", &ate_dr_riesz, py::arg("two_head"), py::arg("eval"), py::arg("spec"));
  m.def("oracle_ate_enumerated", &oracle_ate_enumerated, py::arg("cfg"));

  py::enum_<EstimatorMethod>(m, "EstimatorMethod")
      .value("direct", EstimatorMethod::direct)
      .value("dr_propensity", EstimatorMethod::dr_propensity)
      .value("dr_riesz", EstimatorMethod::dr_riesz);

  py::class_<EffectEstimate>(m, "EffectEstimate")
      .def_readonly("feature_id", &EffectEstimate::feature_id)
      .def_readonly("method", &EffectEstimate::method)
      .def_readonly("value", &EffectEstimate::value)
      .def_readonly("per_seed_values", &EffectEstimate::per_seed_values)
      .def_readonly("mae_vs_truth", &EffectEstimate::mae_vs_truth)
      .def("std_error", &EffectEstimate::std_error);

  py::class_<EstimateOptions>(m, "EstimateOptions")
      .def(py::init<>())
      .def_readwrite("train", &EstimateOptions::train)
      .def_readwrite("featurizer", &EstimateOptions::featurizer)
      .def_readwrite("heldout_frac", &EstimateOptions::heldout_frac)
      .def_readwrite("kfold", &EstimateOptions::kfold)
      .def_readwrite("self_normalize", &EstimateOptions::self_normalize);

  py::class_<EffectEstimateSet>(m, "EffectEstimateSet")
      .def_readonly("direct", &EffectEstimateSet::direct)
      .def_readonly("dr_propensity", &EffectEstimateSet::dr_propensity)
      .def_readonly("dr_riesz", &EffectEstimateSet::dr_riesz);

  m.def("estimate_feature_effect", &estimate_feature_effect, py::arg("corpus"), py::arg("spec"),
        py::arg("options"), py::arg("seeds"), py::arg("threads") = 1);
  m.def("effect_estimates_csv", &effect_estimates_csv, py::arg("sets"));

  py::class_<CfProvenance>(m, "CfProvenance")
      .def_readonly("src_doc_id", &CfProvenance::src_doc_id)
      .def_readonly("flipped", &CfProvenance::flipped)
      .def_readonly("feature_id", &CfProvenance::feature_id);

  py::class_<CounterfactualCorpus>(m, "CounterfactualCorpus")
      .def_readonly("docs", &CounterfactualCorpus::docs)
      .def_readonly("provenance", &CounterfactualCorpus::provenance)
      .def_readonly("taus_by_feature", &CounterfactualCorpus::taus_by_feature)
      .def("__len__", &CounterfactualCorpus::size);

  py::class_<FlipOptions>(m, "FlipOptions")
      .def(py::init<>())
      .def_readwrite("literal_fraction", &FlipOptions::literal_fraction);

  m.def("flip_labels", &flip_labels, py::arg("corpus"), py::arg("spec"), py::arg("tau"),
        py::arg("seed"), py::arg("options") = FlipOptions{});
  m.def("build_augmented", &build_augmented, py::arg("corpus"), py::arg("specs"), py::arg("taus"),
        py::arg("seed"), py::arg("options") = FlipOptions{});
  m.def("train_feag", &train_feag, py::arg("train"), py::arg("augmented"), py::arg("lam"),
        py::arg("cfg"), py::arg("featurizer") = FeaturizerConfig{});
  m.def("train_regularized", &train_regularized, py::arg("train"), py::arg("specs"),
        py::arg("taus"), py::arg("lam"), py::arg("cfg"),
        py::arg("featurizer") = FeaturizerConfig{});
  m.def("subsample_baseline", &subsample_baseline, py::arg("corpus"), py::arg("seed"));
  m.def("remove_token_baseline", &remove_token_baseline, py::arg("train"), py::arg("spec"),
        py::arg("cfg"), py::arg("featurizer") = FeaturizerConfig{});
  m.def("write_augmented_jsonl",
        py::overload_cast<const CounterfactualCorpus&, const std::string&>(&write_jsonl),
        py::arg("augmented"), py::arg("path"));

  py::class_<GroupMetrics>(m, "GroupMetrics")
      .def_readonly("acc", &GroupMetrics::acc)
      .def_readonly("n_per_group", &GroupMetrics::n_per_group)
      .def_readonly("total", &GroupMetrics::total)
      .def_readonly("avg_group", &GroupMetrics::avg_group)
      .def_readonly("has_empty_group", &GroupMetrics::has_empty_group)
      .def_readonly("learned_effect", &GroupMetrics::learned_effect);

  m.def("group_metrics", &group_metrics, py::arg("classifier"), py::arg("test"), py::arg("spec"));
  m.def("learned_effect", &learned_effect, py::arg("classifier"), py::arg("test"),
        py::arg("spec"));
  m.def("group_metrics_json", &group_metrics_json);
  m.def("group_metrics_csv", &group_metrics_csv);
  m.def("group_metrics_table", &group_metrics_table);

  py::class_<BiasRow>(m, "BiasRow")
      .def_readonly("token", &BiasRow::token)
      .def_readonly("riesz_dr_effect", &BiasRow::riesz_dr_effect)
      .def_readonly("direct_effect", &BiasRow::direct_effect)
      .def_readonly("p_y_given_t1", &BiasRow::p_y_given_t1)
      .def_readonly("n_treated", &BiasRow::n_treated)
      .def_readonly("skipped", &BiasRow::skipped)
      .def_readonly("skip_reason", &BiasRow::skip_reason);

  py::class_<BiasReport>(m, "BiasReport").def_readonly("rows", &BiasReport::rows);

  py::class_<BiasScanOptions>(m, "BiasScanOptions")
      .def(py::init<>())
      .def_readwrite("est", &BiasScanOptions::est)
      .def_readwrite("min_count", &BiasScanOptions::min_count)
      .def_readwrite("threads", &BiasScanOptions::threads);

  m.def("bias_scan", &bias_scan, py::arg("corpus"), py::arg("tokens"), py::arg("options"),
        py::arg("seeds"));
  m.def("bias_report_csv", &bias_report_csv);
  m.def("bias_report_json", &bias_report_json);
  m.def("bias_report_table", &bias_report_table);
}
