#include "wjdot/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace wjdot::io {

using nlohmann::json;

namespace {

constexpr std::string_view kDatasetMagic = "wjdot-dataset";
constexpr std::string_view kModelFormat = "wjdot-model";
constexpr std::string_view kAdaptFormat = "wjdot-adapt-result";
constexpr std::string_view kTrajectoryMagic = "# wjdot-trajectory format_version=";
constexpr std::string_view kTrajectoryHeader = "epoch,source_id,group_tag,alpha";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("'" + std::string(tok) + "' is not a number", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
  return v;
}

std::size_t parse_count(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("'" + std::string(tok) + "' is not a nonnegative integer", line);
  return v;
}

Group parse_group_at(std::string_view tok, std::size_t line) {
  try {
    return parse_group(tok);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), line);
  }
}

void check_token(const std::string& s, std::string_view what) {
  if (s.empty()) throw Error(std::string(what) + " must not be empty");
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',')
      throw Error(std::string(what) + " '" + s + "' contains whitespace or a comma");
}

void write_row(std::ostream& out, const VectorXd& x) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) throw NumericError("cannot save a non-finite value");
    out << format_double(x[k]) << ' ';
  }
}

std::size_t label_index(const VectorXd& label) {
  const std::size_t k = argmax(label);
  for (Eigen::Index c = 0; c < label.size(); ++c)
    if (label[c] != (static_cast<std::size_t>(c) == k ? 1.0 : 0.0))
      throw DimensionError("only one-hot labels can be saved");
  return k;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

// JSON helpers ---------------------------------------------------------------

json vec_json(const VectorXd& v) {
  if (!v.allFinite()) throw NumericError("cannot save a non-finite value");
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

template <class T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", 0);
  }
}

VectorXd json_vec(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

void check_format(const json& j, std::string_view format, int version) {
  if (get<std::string>(j, "format") != format)
    throw ParseError("expected a '" + std::string(format) + "' document", 0);
  const int v = get<int>(j, "format_version");
  if (v != version)
    throw ParseError("unsupported format_version " + std::to_string(v) + " (expected " +
                         std::to_string(version) + ")",
                     0);
}

json classifier_json(const nn::SoftmaxClassifier& f) {
  return {{"input_dim", f.input_dim()}, {"num_classes", f.num_classes()},
          {"parameters", vec_json(f.parameters())}};
}

nn::SoftmaxClassifier classifier_from(const json& j) {
  const auto d = get<std::size_t>(j, "input_dim");
  const auto k = get<std::size_t>(j, "num_classes");
  const VectorXd p = json_vec(j, "parameters");
  if (p.size() != static_cast<Eigen::Index>(k * d + k))
    throw ParseError("classifier parameter count does not match its dimensions", 0);
  nn::SoftmaxClassifier f(MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)),
                          VectorXd::Zero(static_cast<Eigen::Index>(k)));
  f.set_parameters(p);
  return f;
}

json extractor_json(const nn::MlpExtractor& g) {
  return {{"dims", g.dims()}, {"parameters", vec_json(g.parameters())}};
}

nn::MlpExtractor extractor_from(const json& j) {
  const auto dims = get<std::vector<std::size_t>>(j, "dims");
  if (dims.size() < 2) throw ParseError("extractor needs at least input and output dims", 0);
  for (auto d : dims)
    if (d == 0) throw ParseError("extractor dims must be positive", 0);
  nn::MlpExtractor g = nn::MlpExtractor::xavier(dims, 0);
  const VectorXd p = json_vec(j, "parameters");
  if (p.size() != static_cast<Eigen::Index>(g.num_parameters()))
    throw ParseError("extractor parameter count does not match its dims", 0);
  g.set_parameters(p);
  return g;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// Dataset --------------------------------------------------------------------

void write_dataset(std::ostream& out, const SourceDomain& domain) {
  const auto report = validate_domain(domain);
  if (!report.ok()) throw DimensionError("source '" + domain.id + "': " + report.violations.front());
  check_token(domain.id, "domain id");
  out << kDatasetMagic << ' ' << kDatasetVersion << '\n'
      << "kind source\n"
      << "id " << domain.id << '\n'
      << "group " << group_name(domain.group) << '\n'
      << "dim " << domain.dim() << '\n'
      << "classes " << domain.num_classes() << '\n'
      << "samples " << domain.size() << '\n'
      << "end\n";
  for (const auto& s : domain.samples) {
    write_row(out, s.embedding);
    out << label_index(s.label) << '\n';
  }
}

void write_dataset(std::ostream& out, const TargetDomain& domain, std::size_t num_classes) {
  check_token(domain.id, "domain id");
  if (domain.embeddings.empty()) throw DimensionError("target '" + domain.id + "' has no adaptation samples");
  if (num_classes == 0) throw DimensionError("class count must be positive");
  const std::size_t d = domain.dim();
  for (const auto& x : domain.embeddings)
    if (static_cast<std::size_t>(x.size()) != d) throw DimensionError("target rows differ in dimension");
  for (const auto& s : domain.test)
    if (static_cast<std::size_t>(s.embedding.size()) != d ||
        static_cast<std::size_t>(s.label.size()) != num_classes)
      throw DimensionError("target test rows disagree with the header dimensions");
  out << kDatasetMagic << ' ' << kDatasetVersion << '\n'
      << "kind target\n"
      << "id " << domain.id << '\n'
      << "group " << group_name(domain.group) << '\n'
      << "dim " << d << '\n'
      << "classes " << num_classes << '\n'
      << "adapt " << domain.embeddings.size() << '\n'
      << "test " << domain.test.size() << '\n'
      << "end\n";
  for (const auto& x : domain.embeddings) {
    write_row(out, x);
    out << "?\n";
  }
  for (const auto& s : domain.test) {
    write_row(out, s.embedding);
    out << label_index(s.label) << '\n';
  }
}

Domain read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!split_ws(line).empty()) return true;
    }
    return false;
  };

  if (!next()) throw ParseError("empty dataset file", 0);
  {
    const auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != kDatasetMagic) throw ParseError("not a dataset file", line_no);
    const auto v = parse_count(tok[1], line_no);
    if (v != static_cast<std::size_t>(kDatasetVersion))
      throw ParseError("unsupported dataset format_version " + std::string(tok[1]), line_no);
  }

  std::map<std::string, std::string, std::less<>> header;
  std::map<std::string, std::size_t, std::less<>> header_line;
  for (;;) {
    if (!next()) throw ParseError("header is not terminated by 'end'", line_no);
    const auto tok = split_ws(line);
    if (tok.size() == 1 && tok[0] == "end") break;
    if (tok.size() != 2) throw ParseError("header lines are 'key value'", line_no);
    const std::string key(tok[0]);
    static const char* known[] = {"kind", "id", "group", "dim", "classes", "samples", "adapt", "test"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ParseError("unknown header field '" + key + "'", line_no);
    if (header.count(key)) throw ParseError("duplicate header field '" + key + "'", line_no);
    header[key] = std::string(tok[1]);
    header_line[key] = line_no;
  }
  const std::size_t end_line = line_no;
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw ParseError("missing header field '" + key + "'", end_line);
    return it->second;
  };

  const std::string kind = field("kind");
  if (kind != "source" && kind != "target")
    throw ParseError("kind must be 'source' or 'target'", header_line["kind"]);
  const std::string id = field("id");
  const Group group = parse_group_at(field("group"), header_line["group"]);
  const std::size_t d = parse_count(field("dim"), header_line["dim"]);
  const std::size_t k = parse_count(field("classes"), header_line["classes"]);
  if (d == 0) throw ParseError("dim must be positive", header_line["dim"]);
  if (k == 0) throw ParseError("classes must be positive", header_line["classes"]);

  std::size_t n_unlabelled = 0, n_labelled = 0;
  if (kind == "source") {
    for (const char* key : {"adapt", "test"})
      if (header.count(key)) throw ParseError(std::string("field '") + key + "' is only valid for targets", header_line[key]);
    n_labelled = parse_count(field("samples"), header_line["samples"]);
    if (n_labelled == 0) throw ParseError("empty domain", header_line["samples"]);
  } else {
    if (header.count("samples")) throw ParseError("field 'samples' is only valid for sources", header_line["samples"]);
    n_unlabelled = parse_count(field("adapt"), header_line["adapt"]);
    n_labelled = parse_count(field("test"), header_line["test"]);
    if (n_unlabelled == 0) throw ParseError("target has no adaptation rows", header_line["adapt"]);
  }

  auto read_row = [&](bool labelled, VectorXd& x, std::size_t& cls) {
    if (!next()) throw ParseError("expected " + std::to_string(n_unlabelled + n_labelled) + " rows", line_no);
    const auto tok = split_ws(line);
    if (tok.size() != d + 1)
      throw ParseError("row has " + std::to_string(tok.size()) + " fields, expected " + std::to_string(d + 1), line_no);
    x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) x[static_cast<Eigen::Index>(c)] = parse_double(tok[c], line_no);
    if (!labelled) {
      if (tok[d] != "?") throw ParseError("adaptation rows carry '?' instead of a class", line_no);
      return;
    }
    if (tok[d] == "?") throw ParseError("row is missing its class index", line_no);
    cls = parse_count(tok[d], line_no);
    if (cls >= k)
      throw ParseError("class index " + std::to_string(cls) + " out of range [0, " + std::to_string(k) + ")", line_no);
  };

  Domain result;
  VectorXd x;
  std::size_t cls = 0;
  if (kind == "source") {
    SourceDomain s{id, {}, group};
    s.samples.reserve(n_labelled);
    for (std::size_t r = 0; r < n_labelled; ++r) {
      read_row(true, x, cls);
      s.samples.push_back({x, one_hot(cls, k)});
    }
    result = std::move(s);
  } else {
    TargetDomain t;
    t.id = id;
    t.group = group;
    for (std::size_t r = 0; r < n_unlabelled; ++r) {
      read_row(false, x, cls);
      t.embeddings.push_back(x);
    }
    for (std::size_t r = 0; r < n_labelled; ++r) {
      read_row(true, x, cls);
      t.test.push_back({x, one_hot(cls, k)});
    }
    result = std::move(t);
  }
  if (next()) throw ParseError("unexpected content after the last row", line_no);
  return result;
}

void save_dataset(const std::filesystem::path& path, const SourceDomain& domain) {
  std::ostringstream ss;
  write_dataset(ss, domain);
  write_file(path, ss.str());
}

void save_dataset(const std::filesystem::path& path, const TargetDomain& domain,
                  std::size_t num_classes) {
  std::ostringstream ss;
  write_dataset(ss, domain, num_classes);
  write_file(path, ss.str());
}

Domain load_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return read_dataset(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

SourceDomain load_source(const std::filesystem::path& path) {
  Domain d = load_dataset(path);
  if (!std::holds_alternative<SourceDomain>(d))
    throw ParseError(path.string() + ": expected a source dataset", 0);
  return std::get<SourceDomain>(std::move(d));
}

TargetDomain load_target(const std::filesystem::path& path) {
  Domain d = load_dataset(path);
  if (!std::holds_alternative<TargetDomain>(d))
    throw ParseError(path.string() + ": expected a target dataset", 0);
  return std::get<TargetDomain>(std::move(d));
}

// Checkpoint -----------------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelVersion;
  j["extractor"] = c.extractor ? extractor_json(*c.extractor) : json(nullptr);
  j["classifier"] = classifier_json(c.classifier);
  if (c.extractor && c.extractor->output_dim() != c.classifier.input_dim())
    throw DimensionError("classifier input does not match the extractor output");
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_format(j, kModelFormat, kModelVersion);
  Checkpoint c;
  if (!j.contains("extractor")) throw ParseError("missing field 'extractor'", 0);
  if (!j.at("extractor").is_null()) c.extractor = extractor_from(j.at("extractor"));
  if (!j.contains("classifier")) throw ParseError("missing field 'classifier'", 0);
  c.classifier = classifier_from(j.at("classifier"));
  if (c.extractor && c.extractor->output_dim() != c.classifier.input_dim())
    throw ParseError("classifier input does not match the extractor output", 0);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file(path, checkpoint_to_json(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

// Adaptation record ----------------------------------------------------------

bool same_result(const adaptation::AdaptResult& x, const adaptation::AdaptResult& y) {
  auto same_epochs = [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].epoch != b[i].epoch || a[i].objective_after_f != b[i].objective_after_f ||
          a[i].objective != b[i].objective || a[i].accepted_step != b[i].accepted_step ||
          a[i].halvings != b[i].halvings || a[i].solver_iterations != b[i].solver_iterations)
        return false;
    return true;
  };
  return x.classifier == y.classifier && x.alpha.values() == y.alpha.values() &&
         x.initial_objective == y.initial_objective && x.objective_trace == y.objective_trace &&
         x.alpha_trajectory.rows() == y.alpha_trajectory.rows() &&
         x.alpha_trajectory.cols() == y.alpha_trajectory.cols() &&
         x.alpha_trajectory == y.alpha_trajectory && same_epochs(x.epochs, y.epochs) &&
         x.converged == y.converged && x.convergence_epoch == y.convergence_epoch &&
         x.solver_converged == y.solver_converged;
}

std::string adapt_record_to_json(const AdaptRecord& r) {
  const auto& res = r.result;
  const std::size_t j_count = res.alpha.size();
  if (r.source_ids.size() != j_count || r.source_groups.size() != j_count)
    throw DimensionError("source registry does not match alpha");
  json j;
  j["format"] = kAdaptFormat;
  j["format_version"] = kAdaptVersion;
  j["target_id"] = r.target_id;
  json sources = json::array();
  for (std::size_t s = 0; s < j_count; ++s)
    sources.push_back({{"id", r.source_ids[s]}, {"group", group_name(r.source_groups[s])}});
  j["sources"] = sources;
  j["alpha"] = vec_json(res.alpha.values());
  j["initial_objective"] = res.initial_objective;
  j["objective_trace"] = res.objective_trace;
  json traj = json::array();
  for (Eigen::Index e = 0; e < res.alpha_trajectory.rows(); ++e)
    traj.push_back(vec_json(res.alpha_trajectory.row(e).transpose()));
  j["alpha_trajectory"] = traj;
  json epochs = json::array();
  for (const auto& e : res.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"objective_after_f", e.objective_after_f},
                      {"objective", e.objective},
                      {"accepted_step", e.accepted_step},
                      {"halvings", e.halvings},
                      {"solver_iterations", e.solver_iterations}});
  j["epochs"] = epochs;
  j["converged"] = res.converged;
  j["convergence_epoch"] = res.convergence_epoch;
  j["solver_converged"] = res.solver_converged;
  j["classifier"] = classifier_json(res.classifier);
  return j.dump(1) + "\n";
}

AdaptRecord adapt_record_from_json(const std::string& text) {
  const json j = parse_json(text);
  check_format(j, kAdaptFormat, kAdaptVersion);
  AdaptRecord r;
  r.target_id = get<std::string>(j, "target_id");
  if (!j.contains("sources") || !j.at("sources").is_array()) throw ParseError("missing field 'sources'", 0);
  for (const auto& s : j.at("sources")) {
    r.source_ids.push_back(get<std::string>(s, "id"));
    r.source_groups.push_back(parse_group(get<std::string>(s, "group")));
  }
  auto& res = r.result;
  try {
    res.alpha = SimplexWeights(json_vec(j, "alpha"));
  } catch (const NumericError& e) {
    throw ParseError(std::string("alpha: ") + e.what(), 0);
  }
  if (res.alpha.size() != r.source_ids.size()) throw ParseError("alpha length differs from the source list", 0);
  res.initial_objective = get<double>(j, "initial_objective");
  res.objective_trace = get<std::vector<double>>(j, "objective_trace");
  const auto traj = get<std::vector<std::vector<double>>>(j, "alpha_trajectory");
  res.alpha_trajectory.resize(static_cast<Eigen::Index>(traj.size()),
                              static_cast<Eigen::Index>(r.source_ids.size()));
  for (std::size_t e = 0; e < traj.size(); ++e) {
    if (traj[e].size() != r.source_ids.size()) throw ParseError("trajectory row has the wrong length", 0);
    for (std::size_t s = 0; s < traj[e].size(); ++s)
      res.alpha_trajectory(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(s)) = traj[e][s];
  }
  if (!j.contains("epochs") || !j.at("epochs").is_array()) throw ParseError("missing field 'epochs'", 0);
  for (const auto& e : j.at("epochs")) {
    adaptation::EpochRecord rec;
    rec.epoch = get<int>(e, "epoch");
    rec.objective_after_f = get<double>(e, "objective_after_f");
    rec.objective = get<double>(e, "objective");
    rec.accepted_step = get<double>(e, "accepted_step");
    rec.halvings = get<int>(e, "halvings");
    rec.solver_iterations = get<int>(e, "solver_iterations");
    res.epochs.push_back(rec);
  }
  res.converged = get<bool>(j, "converged");
  res.convergence_epoch = get<int>(j, "convergence_epoch");
  res.solver_converged = get<bool>(j, "solver_converged");
  if (!j.contains("classifier")) throw ParseError("missing field 'classifier'", 0);
  res.classifier = classifier_from(j.at("classifier"));
  return r;
}

void save_adapt_record(const std::filesystem::path& path, const AdaptRecord& r) {
  write_file(path, adapt_record_to_json(r));
}

AdaptRecord load_adapt_record(const std::filesystem::path& path) {
  try {
    return adapt_record_from_json(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

// Trajectory -----------------------------------------------------------------

bool operator==(const Trajectory& x, const Trajectory& y) {
  return x.source_ids == y.source_ids && x.source_groups == y.source_groups &&
         x.alpha.rows() == y.alpha.rows() && x.alpha.cols() == y.alpha.cols() && x.alpha == y.alpha;
}

Trajectory trajectory_of(const AdaptRecord& r) {
  if (r.result.alpha_trajectory.rows() == 0) throw Error("no alpha trajectory was recorded");
  if (r.source_ids.size() != static_cast<std::size_t>(r.result.alpha_trajectory.cols()) ||
      r.source_groups.size() != r.source_ids.size())
    throw DimensionError("source registry does not match the trajectory");
  return {r.source_ids, r.source_groups, r.result.alpha_trajectory};
}

void write_trajectory(std::ostream& out, const Trajectory& t) {
  if (t.alpha.rows() == 0) throw Error("trajectory is empty");
  if (t.source_ids.size() != static_cast<std::size_t>(t.alpha.cols()) ||
      t.source_groups.size() != t.source_ids.size())
    throw DimensionError("source registry does not match the trajectory");
  for (const auto& id : t.source_ids) check_token(id, "source id");
  out << kTrajectoryMagic << kTrajectoryVersion << '\n' << kTrajectoryHeader << '\n';
  for (Eigen::Index e = 0; e < t.alpha.rows(); ++e)
    for (std::size_t s = 0; s < t.source_ids.size(); ++s)
      out << e + 1 << ',' << t.source_ids[s] << ',' << group_name(t.source_groups[s]) << ','
          << format_double(t.alpha(e, static_cast<Eigen::Index>(s))) << '\n';
}

Trajectory read_trajectory(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file", 0);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind(kTrajectoryMagic, 0) != 0) throw ParseError("missing format_version comment", line_no);
  if (parse_count(std::string_view(line).substr(kTrajectoryMagic.size()), line_no) !=
      static_cast<std::size_t>(kTrajectoryVersion))
    throw ParseError("unsupported trajectory format_version", line_no);
  if (!std::getline(in, line)) throw ParseError("missing column header", line_no + 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) throw ParseError("expected header '" + std::string(kTrajectoryHeader) + "'", line_no);

  struct Row {
    std::size_t epoch;
    std::string id;
    Group group;
    double alpha;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_char(line, ',');
    if (f.size() != 4) throw ParseError("expected 4 comma-separated fields", line_no);
    Row r{parse_count(f[0], line_no), std::string(f[1]), parse_group_at(f[2], line_no),
          parse_double(f[3], line_no), line_no};
    if (r.epoch == 0) throw ParseError("epochs are numbered from 1", line_no);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("trajectory has no rows", line_no);

  Trajectory t;
  for (const auto& r : rows) {
    if (r.epoch != 1) break;
    t.source_ids.push_back(r.id);
    t.source_groups.push_back(r.group);
  }
  const std::size_t j_count = t.source_ids.size();
  if (rows.size() % j_count != 0) throw ParseError("incomplete final epoch", line_no);
  const std::size_t epochs = rows.size() / j_count;
  t.alpha.resize(static_cast<Eigen::Index>(epochs), static_cast<Eigen::Index>(j_count));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t e = i / j_count, s = i % j_count;
    const std::size_t at = rows[i].line;
    if (rows[i].epoch != e + 1) throw ParseError("epochs must be consecutive", at);
    if (rows[i].id != t.source_ids[s] || rows[i].group != t.source_groups[s])
      throw ParseError("source order changes between epochs", at);
    t.alpha(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(s)) = rows[i].alpha;
  }
  return t;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& t) {
  std::ostringstream ss;
  write_trajectory(ss, t);
  write_file(path, ss.str());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return read_trajectory(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

}  // namespace wjdot::io
