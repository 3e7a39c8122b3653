#include "feffect/features.hpp"

#include <algorithm>

namespace feffect {

FeatureSpec FeatureSpec::make_prefix(int id, std::string treated, std::string untreated) {
  if (treated.empty() || untreated.empty() || treated == untreated) {
    throw ConfigError("prefix feature needs two distinct non-empty tokens");
  }
  FeatureSpec s;
  s.feature_id = id;
  s.kind = PrefixPairSpec{std::move(treated), std::move(untreated)};
  return s;
}

FeatureSpec FeatureSpec::make_presence(int id, std::string trigger) {
  if (trigger.empty()) throw ConfigError("presence feature needs a non-empty trigger token");
  FeatureSpec s;
  s.feature_id = id;
  s.kind = PresenceSpec{std::move(trigger)};
  return s;
}

FeatureSpec FeatureSpec::parse(int id, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("feature spec must look like prefix:<treated>,<untreated> or presence:<token>");
  }
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "prefix") {
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("prefix feature spec must list two tokens: prefix:<treated>,<untreated>");
    }
    return make_prefix(id, rest.substr(0, comma), rest.substr(comma + 1));
  }
  if (kind == "presence") {
    return make_presence(id, rest);
  }
  throw ConfigError("unknown feature kind '" + kind + "' (expected prefix or presence)");
}

std::string FeatureSpec::to_string() const {
  if (is_prefix()) {
    return "prefix:" + prefix().treated_token + "," + prefix().untreated_token;
  }
  return "presence:" + presence().trigger_token;
}

void FeaturizerConfig::validate() const {
  if (dim == 0 || (dim & (dim - 1)) != 0) {
    throw ConfigError("featurizer dim must be a power of two");
  }
}

std::uint32_t hash_token(const std::string& token, std::uint64_t hash_seed, std::uint32_t dim) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ hash_seed;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 32;
  return static_cast<std::uint32_t>(h) & (dim - 1);
}

SparseVec featurize(const Document& doc, const FeaturizerConfig& cfg) {
  cfg.validate();
  SparseVec v;
  v.dim = cfg.dim;
  v.entries.reserve(doc.tokens.size());
  for (const auto& tok : doc.tokens) {
    v.entries.emplace_back(hash_token(tok, cfg.hash_seed, cfg.dim), 1.0);
  }
  std::sort(v.entries.begin(), v.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < v.entries.size(); ++i) {
    if (out > 0 && v.entries[out - 1].first == v.entries[i].first) {
      if (cfg.tf_mode == FeaturizerConfig::TfMode::counts) v.entries[out - 1].second += 1.0;
    } else {
      v.entries[out++] = v.entries[i];
    }
  }
  v.entries.resize(out);
  return v;
}

namespace {

std::size_t count_token(const Document& doc, const std::string& tok) {
  return static_cast<std::size_t>(std::count(doc.tokens.begin(), doc.tokens.end(), tok));
}

void check_prefix_consistency(const Document& doc, const PrefixPairSpec& p) {
  const std::size_t n_t = count_token(doc, p.treated_token);
  const std::size_t n_u = count_token(doc, p.untreated_token);
  if (n_t + n_u != 1) {
    throw ConsistencyError("doc " + std::to_string(doc.doc_id) +
                           ": expected exactly one of {" + p.treated_token + ", " +
                           p.untreated_token + "}, found " + std::to_string(n_t + n_u));
  }
  const int implied_t = n_t == 1 ? 1 : 0;
  if (implied_t != doc.treatment) {
    throw ConsistencyError("doc " + std::to_string(doc.doc_id) +
                           ": treatment bit disagrees with the prefix token");
  }
}

}  // namespace

Document apply_counterfactual(const Document& doc, const FeatureSpec& spec) {
  Document out = doc;
  if (spec.is_prefix()) {
    const auto& p = spec.prefix();
    check_prefix_consistency(doc, p);
    const std::string& from = doc.treatment == 1 ? p.treated_token : p.untreated_token;
    const std::string& to = doc.treatment == 1 ? p.untreated_token : p.treated_token;
    for (auto& tok : out.tokens) {
      if (tok == from) tok = to;
    }
    out.treatment = 1 - doc.treatment;
    return out;
  }
  const auto& pr = spec.presence();
  const bool present = count_token(doc, pr.trigger_token) > 0;
  if ((present ? 1 : 0) != doc.treatment) {
    throw ConsistencyError("doc " + std::to_string(doc.doc_id) +
                           ": treatment bit disagrees with presence of '" + pr.trigger_token + "'");
  }
  if (doc.treatment == 1) {
    out.tokens.erase(std::remove(out.tokens.begin(), out.tokens.end(), pr.trigger_token),
                     out.tokens.end());
    if (out.tokens.empty()) {
      throw ConsistencyError("doc " + std::to_string(doc.doc_id) +
                             ": counterfactual edit would leave no tokens");
    }
    out.treatment = 0;
  } else {
    out.tokens.insert(out.tokens.begin(), pr.trigger_token);
    out.treatment = 1;
  }
  return out;
}

Document with_feature_forced(const Document& doc, const FeatureSpec& spec, int t) {
  if (doc.treatment == t) return doc;
  return apply_counterfactual(doc, spec);
}

Document strip_feature_tokens(const Document& doc, const FeatureSpec& spec) {
  Document out = doc;
  auto drop = [&out](const std::string& tok) {
    out.tokens.erase(std::remove(out.tokens.begin(), out.tokens.end(), tok), out.tokens.end());
  };
  if (spec.is_prefix()) {
    drop(spec.prefix().treated_token);
    drop(spec.prefix().untreated_token);
  } else {
    drop(spec.presence().trigger_token);
  }
  return out;
}

int group_of(const Document& doc) { return 1 + doc.treatment + 2 * doc.label; }

}  // namespace feffect
