#include "echoprint/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "echoprint/error.hpp"

namespace echoprint {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads keys of one JSON object and complains about anything left over.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (seen_.count(key) == 0) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(Section& s, const char* key, Enum& out, Parse parse) {
  std::string name;
  s.get(key, name);
  if (!name.empty()) out = parse(name);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void parse_segmenter(const json& j, SegmenterConfig& c) {
  Section s(j, "segmenter");
  s.get("frame_ms", c.frame_ms);
  s.get("hop_ms", c.hop_ms);
  s.get("silence_offset_db", c.silence_offset_db);
  s.get("flatness_threshold", c.flatness_threshold);
  s.get("min_gap_s", c.min_gap_s);
  s.get("min_utterance_s", c.min_utterance_s);
  s.get("trailing_guard_s", c.trailing_guard_s);
  require(c.frame_ms > 0.0 && c.hop_ms > 0.0 && c.hop_ms <= c.frame_ms, "segmenter: bad frame/hop");
  require(c.trailing_guard_s >= 0.0, "segmenter: trailing_guard_s must be >= 0");
}

void parse_fingerprint(const json& j, FingerprintConfig& c) {
  Section s(j, "fingerprint");
  if (const json* q = s.child("cqt")) {
    Section cq(*q, "fingerprint.cqt");
    cq.get("f_min", c.cqt.f_min);
    cq.get("f_max", c.cqt.f_max);
    cq.get("bins_per_octave", c.cqt.bins_per_octave);
  }
  if (const json* n = s.child("noise")) {
    Section ns(*n, "fingerprint.noise");
    ns.get("frame_ms", c.noise.frame_ms);
    ns.get("noise_quantile", c.noise.noise_quantile);
    ns.get("smoothing", c.noise.smoothing);
    ns.get("gain_floor", c.noise.gain_floor);
    ns.get("harmonic_regeneration", c.noise.harmonic_regeneration);
    ns.get("regeneration_mix", c.noise.regeneration_mix);
  }
  s.get("suppress", c.suppress);
  s.get("intervals", c.intervals);
  get_enum(s, "separation", c.separation, separation_from_string);
  s.get("offset_window_ms", c.offset_window_ms);
  s.get("offset_drop_db", c.offset_drop_db);
  s.get("tail_skip_s", c.tail_skip_s);
  s.get("eps_direct", c.eps_direct);
  if (const json* d = s.child("decomposition")) {
    Section ds(*d, "fingerprint.decomposition");
    auto& dc = c.decomposition;
    ds.get("layers", dc.layers);
    ds.get("ranks", dc.ranks);
    ds.get("pool_half_window", dc.pool_half_window);
    ds.get("direct_threshold", dc.direct_threshold);
    std::string rule;
    ds.get("direct_rule", rule);
    if (rule == "row_share") {
      dc.direct_rule = DirectRule::kRowShare;
    } else if (rule == "cumulative_share") {
      dc.direct_rule = DirectRule::kCumulativeShare;
    } else if (!rule.empty()) {
      throw ConfigError("fingerprint.decomposition.direct_rule: unknown rule '" + rule + "'");
    }
    ds.get("tol", dc.nmf.tol);
    ds.get("max_iter", dc.nmf.max_iter);
    ds.get("seed", dc.nmf.seed);
    require(dc.layers >= 1, "fingerprint.decomposition: layers must be >= 1");
  }
  require(c.intervals >= 1, "fingerprint: intervals must be >= 1");
  require(c.cqt.f_min > 0.0 && c.cqt.f_max > c.cqt.f_min && c.cqt.bins_per_octave > 0,
          "fingerprint.cqt: bad frequency range");
  require(c.offset_window_ms > 0.0 && c.offset_drop_db > 0.0 && c.tail_skip_s >= 0.0, "fingerprint: bad voicing-offset settings");
}

void parse_classifier(const json& j, ClassifierConfig& c) {
  Section s(j, "classifier");
  s.get("members", c.members);
  s.get("accept_fraction", c.accept_fraction);
  get_enum(s, "positive_split", c.positive_split, positive_split_from_string);
  s.get("negative_fraction", c.negative_fraction);
  get_enum(s, "features", c.features, feature_map_from_string);
  s.get("C", c.svm.C);
  s.get("tol", c.svm.tol);
  s.get("max_iter", c.svm.max_iter);
  s.get("gamma", c.gamma);
  s.get("gamma_scale", c.gamma_scale);
  s.get("bagging", c.bagging);
  s.get("prefilter", c.prefilter);
  s.get("standardize", c.standardize);
  require(c.members >= 1, "classifier: members must be >= 1");
  require(c.accept_fraction > 0.0 && c.accept_fraction <= 1.0, "classifier: accept_fraction must be in (0, 1]");
  require(c.negative_fraction > 0.0 && c.negative_fraction <= 1.0,
          "classifier: negative_fraction must be in (0, 1]");
  require(c.svm.C > 0.0 && c.gamma >= 0.0 && c.gamma_scale > 0.0, "classifier: C must be positive and gamma non-negative");
}

Vec3 vec3(const json& j, const std::string& where) {
  try {
    const auto v = j.get<std::vector<double>>();
    if (v.size() == 3) return {v[0], v[1], v[2]};
  } catch (const json::exception&) {
  }
  throw ConfigError(where + ": expected three numbers");
}

RoomSpec parse_room(const json& j, const std::string& where, const MaterialTable& materials) {
  Section s(j, where);
  RoomSpec r;
  s.get("label", r.label);
  s.get("max_order", r.max_order);
  if (const json* d = s.child("dims")) r.dims = vec3(*d, s.path("dims"));
  if (const json* p = s.child("source")) r.source_pos = vec3(*p, s.path("source"));
  if (const json* p = s.child("mic")) r.mic_pos = vec3(*p, s.path("mic"));
  std::vector<std::string> surfaces;
  std::vector<double> coeffs;
  s.get("surfaces", surfaces);
  s.get("coeffs", coeffs);
  if (!surfaces.empty() == !coeffs.empty()) throw ConfigError(where + ": give exactly one of surfaces or coeffs");
  if (!surfaces.empty()) {
    if (surfaces.size() != 6) throw ConfigError(where + ".surfaces: expected six materials");
    for (std::size_t i = 0; i < 6; ++i) r.surface_coeffs[i] = materials.pressure_coeff(surfaces[i]);
  } else {
    if (coeffs.size() != 6) throw ConfigError(where + ".coeffs: expected six coefficients");
    for (std::size_t i = 0; i < 6; ++i) r.surface_coeffs[i] = coeffs[i];
  }
  if (r.label.empty()) throw ConfigError(where + ": missing label");
  validate(r);
  return r;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void parse_corpus(const json& j, CorpusConfig& c, const std::filesystem::path& base) {
  Section s(j, "corpus");
  s.get("rooms", c.rooms);
  s.get("max_order", c.max_order);
  s.get("positions", c.positions);
  s.get("traces_per_position", c.traces_per_position);
  s.get("trace_seconds", c.trace_seconds);
  s.get("single_speaker", c.single_speaker);
  s.get("position_jitter", c.position_jitter);
  s.get("source_distance", c.source_distance);
  std::string materials;
  s.get("materials", materials);
  if (!materials.empty()) c.materials = resolve(base, materials);
  if (const json* sp = s.child("speaker")) {
    Section ss(*sp, "corpus.speaker");
    ss.get("f0", c.speaker.f0);
    std::vector<double> formants;
    ss.get("formants", formants);
    if (!formants.empty()) {
      if (formants.size() != 3) throw ConfigError("corpus.speaker.formants: expected three values");
      c.speaker.formants = {formants[0], formants[1], formants[2]};
    }
  }
  if (const json* ch = s.child("channel")) {
    Section cs(*ch, "corpus.channel");
    get_enum(cs, "codec", c.channel.codec, codec_mode_from_string);
    cs.get("loss_rate", c.channel.loss.loss_rate);
    cs.get("frame_ms", c.channel.loss.frame_ms);
    get_enum(cs, "concealment", c.channel.loss.concealment, concealment_from_string);
    require(c.channel.loss.loss_rate >= 0.0 && c.channel.loss.loss_rate < 1.0,
            "corpus.channel.loss_rate must be in [0, 1)");
  }
  if (const json* rs = s.child("room_specs")) {
    if (!rs->is_array()) throw ConfigError("corpus.room_specs: expected an array");
    const MaterialTable table = c.materials ? MaterialTable::load(*c.materials) : MaterialTable::defaults();
    for (std::size_t i = 0; i < rs->size(); ++i) {
      c.room_specs.push_back(parse_room((*rs)[i], "corpus.room_specs[" + std::to_string(i) + "]", table));
    }
  }
  require(c.positions >= 1 && c.traces_per_position >= 1, "corpus: positions and traces_per_position must be >= 1");
  require(c.trace_seconds > 0.0 && c.max_order >= 0, "corpus: bad trace_seconds or max_order");
  require(c.room_specs.empty() ? c.rooms >= 2 : c.room_specs.size() >= 2, "corpus: need at least two rooms");
}

void parse_experiment(const json& j, ExperimentSpec& e) {
  Section s(j, "experiment");
  s.get("kind", e.kind);
  s.get("loss_rates", e.loss_rates);
  std::vector<std::string> names;
  s.get("codecs", names);
  if (!names.empty()) {
    e.codecs.clear();
    for (const auto& n : names) e.codecs.push_back(codec_mode_from_string(n));
  }
  names.clear();
  s.get("concealments", names);
  if (!names.empty()) {
    e.concealments.clear();
    for (const auto& n : names) e.concealments.push_back(concealment_from_string(n));
  }
  s.get("concealment_loss_rate", e.concealment_loss_rate);
  s.get("unlabelled_fractions", e.unlabelled_fractions);
  static const std::set<std::string> kKinds = {"packet_loss", "codec", "concealment", "open_world", "bagging"};
  if (kKinds.count(e.kind) == 0) throw ConfigError("experiment.kind: unknown experiment '" + e.kind + "'");
}

ordered_json room_json(const RoomSpec& r) {
  return {{"label", r.label},
          {"dims", r.dims},
          {"source", r.source_pos},
          {"mic", r.mic_pos},
          {"max_order", r.max_order},
          {"coeffs", r.surface_coeffs}};
}

ordered_json pipeline_json(const PipelineConfig& p) {
  const auto& sg = p.segmenter;
  const auto& f = p.fingerprint;
  const auto& c = p.classifier;
  const auto& d = f.decomposition;
  ordered_json j;
  j["segmenter"] = {{"frame_ms", sg.frame_ms},
                    {"hop_ms", sg.hop_ms},
                    {"silence_offset_db", sg.silence_offset_db},
                    {"flatness_threshold", sg.flatness_threshold},
                    {"min_gap_s", sg.min_gap_s},
                    {"min_utterance_s", sg.min_utterance_s},
                    {"trailing_guard_s", sg.trailing_guard_s}};
  j["fingerprint"] = {
      {"cqt", {{"f_min", f.cqt.f_min}, {"f_max", f.cqt.f_max}, {"bins_per_octave", f.cqt.bins_per_octave}}},
      {"noise",
       {{"frame_ms", f.noise.frame_ms},
        {"noise_quantile", f.noise.noise_quantile},
        {"smoothing", f.noise.smoothing},
        {"gain_floor", f.noise.gain_floor},
        {"harmonic_regeneration", f.noise.harmonic_regeneration},
        {"regeneration_mix", f.noise.regeneration_mix}}},
      {"suppress", f.suppress},
      {"intervals", f.intervals},
      {"separation", to_string(f.separation)},
      {"offset_window_ms", f.offset_window_ms},
      {"offset_drop_db", f.offset_drop_db},
      {"tail_skip_s", f.tail_skip_s},
      {"eps_direct", f.eps_direct},
      {"decomposition",
       {{"layers", d.layers},
        {"ranks", d.ranks},
        {"pool_half_window", d.pool_half_window},
        {"direct_threshold", d.direct_threshold},
        {"direct_rule", d.direct_rule == DirectRule::kRowShare ? "row_share" : "cumulative_share"},
        {"tol", d.nmf.tol},
        {"max_iter", d.nmf.max_iter},
        {"seed", d.nmf.seed}}}};
  j["classifier"] = {{"members", c.members},
                     {"accept_fraction", c.accept_fraction},
                     {"positive_split", to_string(c.positive_split)},
                     {"negative_fraction", c.negative_fraction},
                     {"features", to_string(c.features)},
                     {"C", c.svm.C},
                     {"tol", c.svm.tol},
                     {"max_iter", c.svm.max_iter},
                     {"gamma", c.gamma},
                     {"gamma_scale", c.gamma_scale},
                     {"bagging", c.bagging},
                     {"prefilter", c.prefilter},
                     {"standardize", c.standardize}};
  return j;
}

}  // namespace

Config parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Config cfg;
  Section s(j, "config");
  if (const json* c = s.child("corpus")) parse_corpus(*c, cfg.corpus, base_dir);
  if (const json* c = s.child("segmenter")) parse_segmenter(*c, cfg.pipeline.segmenter);
  if (const json* c = s.child("fingerprint")) parse_fingerprint(*c, cfg.pipeline.fingerprint);
  if (const json* c = s.child("classifier")) parse_classifier(*c, cfg.pipeline.classifier);
  if (const json* c = s.child("evaluation")) {
    Section es(*c, "evaluation");
    es.get("k", cfg.evaluation.k);
    es.get("inverted", cfg.evaluation.inverted);
  }
  if (const json* c = s.child("experiment")) parse_experiment(*c, cfg.experiment);
  if (const json* c = s.child("inputs")) {
    Section is(*c, "inputs");
    const auto path_of = [&](const char* key, std::optional<std::filesystem::path>& out) {
      std::string p;
      is.get(key, p);
      if (!p.empty()) out = resolve(base_dir, p);
    };
    path_of("manifest", cfg.inputs.manifest);
    path_of("fingerprints", cfg.inputs.fingerprints);
    path_of("model", cfg.inputs.model);
    path_of("wav", cfg.inputs.wav);
  }
  if (const json* c = s.child("debug")) {
    Section ds(*c, "debug");
    ds.get("layers", cfg.debug_layers);
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string pipeline_to_json(const PipelineConfig& cfg) { return pipeline_json(cfg).dump(2); }

std::string config_to_json(const Config& cfg) {
  ordered_json j;
  const auto& c = cfg.corpus;
  ordered_json corpus = {{"rooms", c.rooms},
                         {"max_order", c.max_order},
                         {"positions", c.positions},
                         {"traces_per_position", c.traces_per_position},
                         {"trace_seconds", c.trace_seconds},
                         {"single_speaker", c.single_speaker},
                         {"speaker", {{"f0", c.speaker.f0}, {"formants", c.speaker.formants}}},
                         {"position_jitter", c.position_jitter},
                         {"source_distance", c.source_distance},
                         {"channel",
                          {{"codec", to_string(c.channel.codec)},
                           {"loss_rate", c.channel.loss.loss_rate},
                           {"frame_ms", c.channel.loss.frame_ms},
                           {"concealment", to_string(c.channel.loss.concealment)}}}};
  if (c.materials) corpus["materials"] = c.materials->string();
  if (!c.room_specs.empty()) {
    ordered_json rooms = ordered_json::array();
    for (const auto& r : c.room_specs) rooms.push_back(room_json(r));
    corpus["room_specs"] = rooms;
  }
  j["corpus"] = corpus;
  const auto p = pipeline_json(cfg.pipeline);
  for (auto it = p.begin(); it != p.end(); ++it) j[it.key()] = it.value();
  j["evaluation"] = {{"k", cfg.evaluation.k}, {"inverted", cfg.evaluation.inverted}};
  const auto& e = cfg.experiment;
  std::vector<std::string> codecs, concealments;
  for (auto m : e.codecs) codecs.push_back(to_string(m));
  for (auto s : e.concealments) concealments.push_back(to_string(s));
  j["experiment"] = {{"kind", e.kind},
                     {"loss_rates", e.loss_rates},
                     {"codecs", codecs},
                     {"concealment_loss_rate", e.concealment_loss_rate},
                     {"concealments", concealments},
                     {"unlabelled_fractions", e.unlabelled_fractions}};
  j["debug"] = {{"layers", cfg.debug_layers}};
  return j.dump(2);
}

RoomSpec load_room_spec(const std::filesystem::path& path, const MaterialTable& materials) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open room spec " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("room spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_room(j, path.filename().string(), materials);
}

}  // namespace echoprint
