#include "fpn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace fpn {

using nlohmann::json;

std::vector<double> WidebandConfig::frequencies(double carrier) const {
  validate();
  std::vector<double> f(static_cast<std::size_t>(num_subcarriers));
  for (int k = 1; k <= num_subcarriers; ++k)
    f[static_cast<std::size_t>(k - 1)] =
        carrier + (k - 1 - (num_subcarriers - 1) / 2.0) * bandwidth / num_subcarriers;
  return f;
}

void WidebandConfig::validate() const {
  require(num_subcarriers >= 1, "wideband: K must be >= 1");
  require(bandwidth > 0.0, "wideband: bandwidth must be positive");
}

void RunConfig::validate() const {
  geometry.validate();
  channel.validate();
  pilot.validate(geometry);
  noise.validate();
  require(snr_max_db >= snr_min_db, "config: empty SNR range");
  require(n_train >= 1 && n_val >= 1 && n_test >= 1, "config: split sizes must be >= 1");
  train.validate();
  require(inference.epsilon > 0.0 && inference.max_iters >= 1, "config: invalid inference options");
  wideband.validate();
  require(adapt.steps >= 0 && adapt.lr > 0.0, "config: invalid self-adaptation options");
  require(!snr_grid.empty(), "config: SNR grid must be nonempty");
}

SampleSpec RunConfig::sample_spec() const {
  SampleSpec s;
  s.channel = channel;
  s.noise = noise;
  s.snr_min_db = snr_min_db;
  s.snr_max_db = snr_max_db;
  return s;
}

std::uint64_t RunConfig::split_seed(const std::string& split) const {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : split) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RunConfig desk_config() {
  RunConfig c;
  c.name = "desk";
  c.geometry = ArrayGeometry::from_wavelengths(4, 16, 300e9, 8.0);
  const double dr = aperture_and_rayleigh(c.geometry).rayleigh;
  c.channel.los_distance = 1.5 * dr;
  c.channel.nlos_min = 0.5 * dr;
  c.channel.nlos_max = 1.25 * dr;
  c.channel.normalize_gain = true;
  c.pilot.num_slots = 8;
  c.train.width = 32;
  c.train.blocks = 3;
  c.train.skip = 0.3;
  c.train.epochs = 12;
  c.train.learning_rate = 3e-3;
  c.train.decay_every = 4;
  c.baselines.oamp_sparsity = 0.3;
  c.baselines.oamp_prior_var = 0.05;
  c.wideband.num_subcarriers = 32;
  c.wideband.bandwidth = 0.05 * c.geometry.carrier;
  c.train.seed = c.seed;
  return c;
}

RunConfig paper_config() {
  RunConfig c;
  c.name = "paper";
  c.geometry = ArrayGeometry{};  // S = 4, S_bar = 256, d_a = 0.5 mm, d_sub = 56 mm, 300 GHz
  c.channel = ChannelConfig{};
  c.channel.normalize_gain = true;
  c.pilot.num_slots = 128;
  c.n_train = 80000;
  c.n_val = 5000;
  c.n_test = 5000;
  c.train.width = 64;
  c.train.blocks = 3;
  c.train.epochs = 100;
  c.wideband.bandwidth = 15e9;
  c.train.seed = c.seed;
  return c;
}

namespace {

const char* field_name(FieldMode m) {
  switch (m) {
    case FieldMode::force_far: return "far";
    case FieldMode::force_near: return "near";
    default: return "automatic";
  }
}

FieldMode parse_field(const std::string& s) {
  if (s == "automatic") return FieldMode::automatic;
  if (s == "far") return FieldMode::force_far;
  if (s == "near") return FieldMode::force_near;
  throw InvalidInput("config: unknown field mode '" + s + "'");
}

const char* lipschitz_name(LipschitzMethod m) {
  return m == LipschitzMethod::spectral ? "spectral" : "random_probe";
}

const char* safeguard_name(SafeguardMode m) {
  switch (m) {
    case SafeguardMode::batch: return "batch";
    case SafeguardMode::epoch: return "epoch";
    case SafeguardMode::final: return "final";
  }
  return "epoch";
}

SafeguardMode parse_safeguard(const std::string& s) {
  if (s == "batch") return SafeguardMode::batch;
  if (s == "epoch") return SafeguardMode::epoch;
  if (s == "final") return SafeguardMode::final;
  throw InvalidInput("config: unknown safeguard mode '" + s + "'");
}

LipschitzMethod parse_lipschitz(const std::string& s) {
  if (s == "spectral") return LipschitzMethod::spectral;
  if (s == "random_probe") return LipschitzMethod::random_probe;
  throw InvalidInput("config: unknown Lipschitz method '" + s + "'");
}

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> keys) {
  require(j.is_object(), "config: section '" + section + "' must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    require(allowed.count(k) > 0, "config: unknown key '" + section + "." + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const RunConfig& c) {
  const auto& g = c.geometry;
  const auto& ch = c.channel;
  const auto& t = c.train;
  const auto& b = c.baselines;
  return {
      {"name", c.name},
      {"seed", c.seed},
      {"operator_seed", c.operator_seed},
      {"geometry", {{"S", g.num_subarrays}, {"S_bar", g.antennas_per_subarray},
                    {"d_a", g.ae_spacing}, {"d_sub", g.sa_spacing}, {"f_c", g.carrier}}},
      {"channel",
       {{"L", ch.num_paths}, {"los_present", ch.los_present}, {"r_1", ch.los_distance},
        {"r_nlos", {ch.nlos_min, ch.nlos_max}}, {"tau_los", ch.los_delay},
        {"tau_nlos", {ch.nlos_delay_min, ch.nlos_delay_max}}, {"k_abs", ch.k_abs},
        {"n_t", {ch.refractive_index.real(), ch.refractive_index.imag()}},
        {"sigma_rough", ch.roughness}, {"theta", {ch.theta_min, ch.theta_max}},
        {"phi", {ch.phi_min, ch.phi_max}}, {"phi_in", {ch.phi_in_min, ch.phi_in_max}},
        {"field", field_name(ch.field_mode)}, {"normalize_gain", ch.normalize_gain}}},
      {"pilot", {{"Q", c.pilot.num_slots},
                 {"combiner", c.pilot.resolution == CombinerResolution::one_bit ? "one_bit"
                                                                                : "infinite"}}},
      {"noise", {{"kind", c.noise.kind == NoiseKind::awgn ? "awgn" : "alpha_stable"},
                 {"snr_db", {c.snr_min_db, c.snr_max_db}}, {"gsnr_db", c.noise.gsnr_db},
                 {"alpha", c.noise.alpha}, {"beta", c.noise.beta}}},
      {"data", {{"train", c.n_train}, {"val", c.n_val}, {"test", c.n_test}}},
      {"network", {{"C", t.width}, {"B", t.blocks}, {"skip", t.skip}}},
      {"training",
       {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
        {"decay_every", t.decay_every}, {"decay_factor", t.decay_factor}, {"gamma", t.gamma},
        {"epsilon", t.epsilon}, {"max_iters", t.max_iters}, {"eval_max_iters", t.eval_max_iters},
        {"safeguard", safeguard_name(t.safeguard)}, {"lipschitz_method", lipschitz_name(t.lipschitz_method)},
        {"probe_relative", t.probe_relative}, {"power_iters", t.power_iters},
        {"final_power_iters", t.final_power_iters},
        {"lipschitz_points", t.lipschitz_points}, {"contraction_target", t.contraction_target}}},
      {"inference", {{"epsilon", c.inference.epsilon}, {"max_iters", c.inference.max_iters}}},
      {"baselines",
       {{"max_iters", b.max_iters}, {"tolerance", b.tolerance}, {"fista_lambda", b.fista_lambda},
        {"omp_sparsity", b.omp_sparsity}, {"oamp_sparsity", b.oamp_sparsity},
        {"oamp_prior_var", b.oamp_prior_var}}},
      {"wideband", {{"K", c.wideband.num_subcarriers}, {"B", c.wideband.bandwidth}}},
      {"adapt", {{"steps", c.adapt.steps}, {"lr", c.adapt.lr},
                 {"max_iters", c.adapt.solve.max_iters}}},
      {"snr_grid", c.snr_grid},
  };
}

RunConfig from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  check_keys(j, "", {"name", "seed", "operator_seed", "geometry", "channel", "pilot", "noise",
                     "data", "network", "training", "inference", "baselines", "wideband", "adapt",
                     "snr_grid"});
  read(j, "name", c.name);
  read(j, "seed", c.seed);
  read(j, "operator_seed", c.operator_seed);
  read(j, "snr_grid", c.snr_grid);

  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    check_keys(g, "geometry", {"S", "S_bar", "d_a", "d_sub", "f_c"});
    read(g, "S", c.geometry.num_subarrays);
    read(g, "S_bar", c.geometry.antennas_per_subarray);
    read(g, "d_a", c.geometry.ae_spacing);
    read(g, "d_sub", c.geometry.sa_spacing);
    read(g, "f_c", c.geometry.carrier);
  }
  if (j.contains("channel")) {
    const json& ch = j.at("channel");
    check_keys(ch, "channel", {"L", "los_present", "r_1", "r_nlos", "tau_los", "tau_nlos", "k_abs",
                               "n_t", "sigma_rough", "theta", "phi", "phi_in", "field",
                               "normalize_gain"});
    auto& o = c.channel;
    read(ch, "L", o.num_paths);
    read(ch, "los_present", o.los_present);
    read(ch, "r_1", o.los_distance);
    read(ch, "tau_los", o.los_delay);
    read(ch, "k_abs", o.k_abs);
    read(ch, "sigma_rough", o.roughness);
    read(ch, "normalize_gain", o.normalize_gain);
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (!ch.contains(key)) return;
      const auto v = ch.at(key).get<std::vector<double>>();
      require(v.size() == 2, std::string("config: channel.") + key + " must be [min, max]");
      lo = v[0];
      hi = v[1];
    };
    pair("r_nlos", o.nlos_min, o.nlos_max);
    pair("tau_nlos", o.nlos_delay_min, o.nlos_delay_max);
    pair("theta", o.theta_min, o.theta_max);
    pair("phi", o.phi_min, o.phi_max);
    pair("phi_in", o.phi_in_min, o.phi_in_max);
    if (ch.contains("n_t")) {
      const auto v = ch.at("n_t").get<std::vector<double>>();
      require(v.size() == 2, "config: channel.n_t must be [real, imag]");
      o.refractive_index = {v[0], v[1]};
    }
    if (ch.contains("field")) o.field_mode = parse_field(ch.at("field").get<std::string>());
  }
  if (j.contains("pilot")) {
    const json& p = j.at("pilot");
    check_keys(p, "pilot", {"Q", "combiner"});
    read(p, "Q", c.pilot.num_slots);
    if (p.contains("combiner")) {
      const auto s = p.at("combiner").get<std::string>();
      require(s == "one_bit" || s == "infinite", "config: combiner must be one_bit or infinite");
      c.pilot.resolution = s == "one_bit" ? CombinerResolution::one_bit : CombinerResolution::infinite;
    }
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    check_keys(n, "noise", {"kind", "snr_db", "gsnr_db", "alpha", "beta"});
    if (n.contains("kind")) {
      const auto s = n.at("kind").get<std::string>();
      require(s == "awgn" || s == "alpha_stable", "config: noise.kind must be awgn or alpha_stable");
      c.noise.kind = s == "awgn" ? NoiseKind::awgn : NoiseKind::alpha_stable;
    }
    if (n.contains("snr_db")) {
      const auto v = n.at("snr_db").get<std::vector<double>>();
      require(v.size() == 2, "config: noise.snr_db must be [min, max]");
      c.snr_min_db = v[0];
      c.snr_max_db = v[1];
    }
    read(n, "gsnr_db", c.noise.gsnr_db);
    read(n, "alpha", c.noise.alpha);
    read(n, "beta", c.noise.beta);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"train", "val", "test"});
    read(d, "train", c.n_train);
    read(d, "val", c.n_val);
    read(d, "test", c.n_test);
  }
  if (j.contains("network")) {
    const json& n = j.at("network");
    check_keys(n, "network", {"C", "B", "skip"});
    read(n, "C", c.train.width);
    read(n, "B", c.train.blocks);
    read(n, "skip", c.train.skip);
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    check_keys(t, "training",
               {"epochs", "batch_size", "learning_rate", "decay_every", "decay_factor", "gamma",
                "epsilon", "max_iters", "eval_max_iters", "safeguard", "lipschitz_method",
                "probe_relative", "power_iters", "final_power_iters", "lipschitz_points", "contraction_target"});
    auto& o = c.train;
    read(t, "epochs", o.epochs);
    read(t, "batch_size", o.batch_size);
    read(t, "learning_rate", o.learning_rate);
    read(t, "decay_every", o.decay_every);
    read(t, "decay_factor", o.decay_factor);
    read(t, "gamma", o.gamma);
    read(t, "epsilon", o.epsilon);
    read(t, "max_iters", o.max_iters);
    read(t, "eval_max_iters", o.eval_max_iters);
    if (t.contains("safeguard")) o.safeguard = parse_safeguard(t.at("safeguard").get<std::string>());
    read(t, "probe_relative", o.probe_relative);
    read(t, "power_iters", o.power_iters);
    read(t, "final_power_iters", o.final_power_iters);
    read(t, "lipschitz_points", o.lipschitz_points);
    read(t, "contraction_target", o.contraction_target);
    if (t.contains("lipschitz_method"))
      o.lipschitz_method = parse_lipschitz(t.at("lipschitz_method").get<std::string>());
  }
  if (j.contains("inference")) {
    const json& i = j.at("inference");
    check_keys(i, "inference", {"epsilon", "max_iters"});
    read(i, "epsilon", c.inference.epsilon);
    read(i, "max_iters", c.inference.max_iters);
  }
  if (j.contains("baselines")) {
    const json& b = j.at("baselines");
    check_keys(b, "baselines", {"max_iters", "tolerance", "fista_lambda", "omp_sparsity",
                                "oamp_sparsity", "oamp_prior_var"});
    auto& o = c.baselines;
    read(b, "max_iters", o.max_iters);
    read(b, "tolerance", o.tolerance);
    read(b, "fista_lambda", o.fista_lambda);
    read(b, "omp_sparsity", o.omp_sparsity);
    read(b, "oamp_sparsity", o.oamp_sparsity);
    read(b, "oamp_prior_var", o.oamp_prior_var);
  }
  if (j.contains("wideband")) {
    const json& w = j.at("wideband");
    check_keys(w, "wideband", {"K", "B"});
    read(w, "K", c.wideband.num_subcarriers);
    read(w, "B", c.wideband.bandwidth);
  }
  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    check_keys(a, "adapt", {"steps", "lr", "max_iters"});
    read(a, "steps", c.adapt.steps);
    read(a, "lr", c.adapt.lr);
    read(a, "max_iters", c.adapt.solve.max_iters);
  }
  c.train.snr_min_db = c.snr_min_db;
  c.train.snr_max_db = c.snr_max_db;
  c.train.seed = c.seed;
  c.adapt.solve.epsilon = c.inference.epsilon;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config not found: " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw InvalidInput("config: " + path.string() + ": " + e.what());
  }
  RunConfig base = desk_config();
  if (j.value("name", std::string()) == "paper") base = paper_config();
  return from_json(j, base);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path.string());
  os << to_json(cfg).dump(2) << "\n";
}

std::string config_digest(const RunConfig& cfg) {
  const std::string s = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fpn
