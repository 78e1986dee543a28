#include "cbu/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cbu/models.hpp"

namespace cbu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

double parse_real(const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw std::invalid_argument("not a number: '" + s + "'");
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite number: '" + s + "'");
  return v;
}

// Splits at top-level commas (parentheses respected).
std::vector<std::string> split_args(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// "name(args)" -> {name, args}; no parentheses -> {text, ""} with has_args false.
struct Call {
  std::string name;
  std::string args;
  bool has_args = false;
};

Call parse_call(const std::string& text) {
  const std::string s = trim(text);
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, "", false};
  if (s.back() != ')') throw std::invalid_argument("unbalanced parentheses in '" + s + "'");
  return {trim(s.substr(0, open)), s.substr(open + 1, s.size() - open - 2), true};
}

RateProfile parse_atom(const std::string& text) {
  const Call call = parse_call(text);
  if (!call.has_args) {
    const double v = parse_real(call.name);
    return [v](double) { return v; };
  }
  const auto args = split_args(call.args);
  if (call.name == "const") {
    if (args.size() != 1) throw std::invalid_argument("const takes one argument");
    const double a = parse_real(args[0]);
    return [a](double) { return a; };
  }
  if (call.name == "sin") {
    if (args.size() != 3) throw std::invalid_argument("sin takes (amplitude, frequency, phase)");
    const double a = parse_real(args[0]), w = parse_real(args[1]), p = parse_real(args[2]);
    return [a, w, p](double t) { return a * std::sin(w * t + p); };
  }
  if (call.name == "table") {
    std::vector<std::pair<double, double>> pts;
    for (const auto& a : args) {
      const auto colon = a.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("table entries are t:v");
      pts.emplace_back(parse_real(a.substr(0, colon)), parse_real(a.substr(colon + 1)));
    }
    if (pts.empty()) throw std::invalid_argument("empty table");
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (!(pts[i].first > pts[i - 1].first))
        throw std::invalid_argument("table times must increase");
    return [pts](double t) {
      if (t <= pts.front().first) return pts.front().second;
      if (t >= pts.back().first) return pts.back().second;
      auto it = std::upper_bound(pts.begin(), pts.end(), t,
                                 [](double x, const auto& p) { return x < p.first; });
      const auto& b = *it;
      const auto& a = *(it - 1);
      const double s = (t - a.first) / (b.first - a.first);
      return a.second + s * (b.second - a.second);
    };
  }
  throw std::invalid_argument("unknown profile '" + call.name + "'");
}

Mode parse_mode(const std::string& s) {
  static const std::map<std::string, Mode> modes{
      {"integrate", Mode::integrate},
      {"unravel", Mode::unravel},
      {"pair", Mode::pair},
      {"embed", Mode::embed},
      {"recover-embedding", Mode::recover_embedding},
      {"recover-martingale", Mode::recover_martingale},
      {"spa-scan", Mode::spa_scan},
      {"reproduce-thermal-qubit", Mode::reproduce_thermal_qubit},
  };
  auto it = modes.find(s);
  if (it == modes.end()) throw std::invalid_argument("unknown mode '" + s + "'");
  return it->second;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& a : split_args(s)) out.push_back(parse_real(a));
  return out;
}

template <typename T>
T parse_unsigned(const std::string& text) {
  const std::string s = trim(text);
  T v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

}  // namespace

ConfigError::ConfigError(int line, std::string field, const std::string& message)
    : std::runtime_error(message), line_(line), field_(std::move(field)) {}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::integrate: return "integrate";
    case Mode::unravel: return "unravel";
    case Mode::pair: return "pair";
    case Mode::embed: return "embed";
    case Mode::recover_embedding: return "recover-embedding";
    case Mode::recover_martingale: return "recover-martingale";
    case Mode::spa_scan: return "spa-scan";
    case Mode::reproduce_thermal_qubit: return "reproduce-thermal-qubit";
  }
  return "unknown";
}

Complex parse_complex(const std::string& text) {
  const std::string s = strip_spaces(text);
  if (s.empty()) throw std::invalid_argument("empty complex literal");
  if (s.back() != 'i') return {parse_real(s), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  // The imaginary part starts at the last sign that is not an exponent sign.
  std::size_t split = std::string::npos;
  for (std::size_t k = body.size(); k-- > 0;) {
    if ((body[k] == '+' || body[k] == '-') && !(k > 0 && (body[k - 1] == 'e' || body[k - 1] == 'E'))) {
      split = k;
      break;
    }
  }
  const std::string re = split == std::string::npos ? "" : body.substr(0, split);
  std::string im = split == std::string::npos ? body : body.substr(split);
  double imag = 0.0;
  if (im.empty() || im == "+") imag = 1.0;
  else if (im == "-") imag = -1.0;
  else imag = parse_real(im);
  return {re.empty() ? 0.0 : parse_real(re), imag};
}

ComplexMatrix parse_matrix(const std::string& text) {
  std::vector<std::vector<Complex>> rows;
  for (const auto& row : split_args(text, ';')) {
    std::vector<Complex> r;
    for (const auto& e : split_args(row)) r.push_back(parse_complex(e));
    rows.push_back(std::move(r));
  }
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) throw std::invalid_argument("matrix rows have different lengths");
  ComplexMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

RateProfile parse_profile(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty profile");
  // Split into signed top-level terms.
  std::vector<std::pair<double, std::string>> terms;
  int depth = 0;
  std::string cur;
  double sign = 1.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const char c = s[k];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    const bool exponent = k > 0 && (s[k - 1] == 'e' || s[k - 1] == 'E') && k >= 2 &&
                          std::isdigit(static_cast<unsigned char>(s[k - 2]));
    if ((c == '+' || c == '-') && depth == 0 && !exponent) {
      if (!trim(cur).empty()) terms.emplace_back(sign, trim(cur));
      cur.clear();
      sign = c == '-' ? -1.0 : 1.0;
      continue;
    }
    cur += c;
  }
  if (trim(cur).empty()) throw std::invalid_argument("dangling operator in '" + s + "'");
  terms.emplace_back(sign, trim(cur));

  std::vector<std::pair<double, RateProfile>> parts;
  for (const auto& [sg, term] : terms) {
    double coeff = sg;
    std::string atom = term;
    int d = 0;
    for (std::size_t k = 0; k < term.size(); ++k) {
      if (term[k] == '(') ++d;
      if (term[k] == ')') --d;
      if (term[k] == '*' && d == 0) {
        coeff *= parse_real(term.substr(0, k));
        atom = trim(term.substr(k + 1));
        break;
      }
    }
    parts.emplace_back(coeff, parse_atom(atom));
  }
  if (parts.size() == 1 && parts[0].first == 1.0) return parts[0].second;
  return [parts](double t) {
    double v = 0.0;
    for (const auto& [c, f] : parts) v += c * f(t);
    return v;
  };
}

ComplexMatrix parse_operator(const std::string& text, Index dim) {
  const Call call = parse_call(text);
  auto need_qubit = [&] {
    if (dim != 2) throw std::invalid_argument(call.name + " requires dim = 2");
  };
  ComplexMatrix m;
  if (call.name == "sigma1") need_qubit(), m = pauli::sigma1();
  else if (call.name == "sigma2") need_qubit(), m = pauli::sigma2();
  else if (call.name == "sigma3") need_qubit(), m = pauli::sigma3();
  else if (call.name == "sigma_plus") need_qubit(), m = pauli::sigma_plus();
  else if (call.name == "sigma_minus") need_qubit(), m = pauli::sigma_minus();
  else if (call.name == "identity") m = ComplexMatrix::Identity(dim, dim);
  else if (call.name == "gell_mann") {
    const auto k = parse_unsigned<std::size_t>(call.args);
    const auto basis = gell_mann_basis(dim);
    if (k < 1 || k > basis.size())
      throw std::invalid_argument("gell_mann index out of range 1.." + std::to_string(basis.size()));
    m = basis[k - 1];
  } else if (call.name == "matrix") {
    m = parse_matrix(call.args);
  } else {
    throw std::invalid_argument("unknown operator '" + call.name + "'");
  }
  if (m.rows() != dim || m.cols() != dim)
    throw std::invalid_argument("operator is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", expected dim " + std::to_string(dim));
  return m;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.hash = fnv1a(text);
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  std::map<std::string, int> seen;  // "section.key" -> line, for duplicates outside repeated sections
  bool model_section = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section == "hamiltonian") cfg.hamiltonian.push_back({"", "1", line_no});
      else if (section == "channel") cfg.channels.push_back({"", "", line_no});
      else if (section == "model") {
        if (model_section) throw ConfigError(line_no, "model", "duplicate [model] section");
        model_section = true;
        cfg.model = ModelSpec{};
      } else if (section != "run" && section != "initial" && section != "pairing" &&
                 section != "spa" && section != "tolerances") {
        throw ConfigError(line_no, section, "unknown section");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string field = section.empty() ? key : section + "." + key;
    if (value.empty()) throw ConfigError(line_no, field, "empty value");
    if (section != "hamiltonian" && section != "channel") {
      if (seen.count(field)) throw ConfigError(line_no, field, "duplicate key");
      seen[field] = line_no;
    }

    try {
      if (section.empty() || section == "run") {
        if (key == "mode") cfg.mode = parse_mode(value);
        else if (key == "dim") cfg.dim = static_cast<Index>(parse_unsigned<unsigned>(value));
        else if (key == "t0") cfg.t0 = parse_real(value);
        else if (key == "t1") cfg.t1 = parse_real(value);
        else if (key == "dt") cfg.dt = parse_real(value);
        else if (key == "record_stride") cfg.record_stride = static_cast<long>(parse_unsigned<unsigned long>(value));
        else if (key == "n_traj") cfg.n_traj = parse_unsigned<std::size_t>(value);
        else if (key == "seed") cfg.seed = parse_unsigned<std::uint64_t>(value);
        else if (key == "threads") cfg.threads = parse_unsigned<unsigned>(value);
        else if (key == "output") cfg.output = value;
        else if (key == "record_trajectories") cfg.record_trajectories = parse_unsigned<std::size_t>(value);
        else if (key == "povm_constant") cfg.povm_constant = parse_real(value);
        else if (key == "canonical") cfg.canonical = parse_bool(value);
        else throw std::invalid_argument("unknown key");
      } else if (section == "model") {
        auto& m = *cfg.model;
        if (key == "name") m.name = value;
        else if (key == "g") m.g = parse_real(value);
        else if (key == "beta") m.beta = parse_real(value);
        else if (key == "omega") m.omega = parse_real(value);
        else if (key == "drive") m.drive = parse_real(value);
        else if (key == "frequency") m.frequency = parse_real(value);
        else if (key == "w") m.w = parse_real(value);
        else throw std::invalid_argument("unknown key");
      } else if (section == "hamiltonian") {
        auto& term = cfg.hamiltonian.back();
        if (key == "op") term.op = value;
        else if (key == "coeff") parse_profile(value), term.coeff = value;
        else throw std::invalid_argument("unknown key");
      } else if (section == "channel") {
        auto& ch = cfg.channels.back();
        if (key == "op") ch.op = value;
        else if (key == "rate") parse_profile(value), ch.coeff = value;
        else throw std::invalid_argument("unknown key");
      } else if (section == "initial") {
        if (key == "state") cfg.initial_state = value;
        else throw std::invalid_argument("unknown key");
      } else if (section == "pairing") {
        if (key == "c") {
          if (value != "optimal") parse_profile(value);
          cfg.shift = value;
        } else {
          throw std::invalid_argument("unknown key");
        }
      } else if (section == "spa") {
        if (key == "times") cfg.spa_times = parse_list(value);
        else if (key == "dts") cfg.spa_dts = parse_list(value);
        else if (key == "factors") cfg.spa_factors = parse_list(value);
        else throw std::invalid_argument("unknown key");
      } else if (section == "tolerances") {
        auto& t = cfg.tolerances;
        const double v = parse_real(value);
        if (!(v > 0.0)) throw std::invalid_argument("tolerance must be positive");
        if (key == "hermiticity") t.hermiticity = v;
        else if (key == "psd_slack") t.psd_slack = v;
        else if (key == "flow_composition") t.flow_composition = v;
        else if (key == "trace") t.trace = v;
        else if (key == "orthonormality") t.orthonormality = v;
        else if (key == "povm") t.povm = v;
        else if (key == "state_norm") t.state_norm = v;
        else if (key == "max_condition") t.max_condition = v;
        else throw std::invalid_argument("unknown key");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(line_no, field, e.what());
    }
  }

  // Whole-file validation.
  if (!(cfg.dt > 0.0)) throw ConfigError(seen.count("dt") ? seen["dt"] : 0, "dt", "dt must be > 0");
  if (!(cfg.t1 > cfg.t0)) throw ConfigError(seen.count("t1") ? seen["t1"] : 0, "t1", "t1 must be > t0");
  if (cfg.dim < 2) throw ConfigError(seen.count("dim") ? seen["dim"] : 0, "dim", "dim must be >= 2");
  if (cfg.record_stride < 1) throw ConfigError(0, "record_stride", "record_stride must be >= 1");
  const bool needs_traj = cfg.mode == Mode::unravel || cfg.mode == Mode::recover_martingale ||
                          cfg.mode == Mode::reproduce_thermal_qubit;
  if (needs_traj && cfg.n_traj < 1) throw ConfigError(0, "n_traj", "n_traj must be >= 1");
  if (cfg.model) {
    if (!cfg.hamiltonian.empty() || !cfg.channels.empty())
      throw ConfigError(0, "model", "[model] cannot be combined with [hamiltonian] or [channel]");
    static const char* names[] = {"thermal_qubit", "negative_rate_qubit", "single_decay_qubit"};
    if (std::find(std::begin(names), std::end(names), cfg.model->name) == std::end(names))
      throw ConfigError(0, "model.name", "unknown model '" + cfg.model->name + "'");
    cfg.dim = 2;
  } else if (cfg.mode != Mode::reproduce_thermal_qubit) {
    if (cfg.channels.empty()) throw ConfigError(0, "channel", "no [channel] sections and no [model]");
  }
  for (const auto& h : cfg.hamiltonian) {
    if (h.op.empty()) throw ConfigError(h.line, "hamiltonian.op", "missing op");
    try {
      parse_operator(h.op, cfg.dim);
    } catch (const std::exception& e) {
      throw ConfigError(h.line, "hamiltonian.op", e.what());
    }
  }
  for (const auto& c : cfg.channels) {
    if (c.op.empty()) throw ConfigError(c.line, "channel.op", "missing op");
    if (c.coeff.empty()) throw ConfigError(c.line, "channel.rate", "missing rate");
    try {
      parse_operator(c.op, cfg.dim);
    } catch (const std::exception& e) {
      throw ConfigError(c.line, "channel.op", e.what());
    }
  }
  try {
    build_initial_state(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(seen.count("initial.state") ? seen["initial.state"] : 0, "initial.state", e.what());
  }
  for (double v : cfg.spa_dts)
    if (!(v > 0.0)) throw ConfigError(0, "spa.dts", "step sizes must be > 0");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "config", "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

CanonicalMasterEquation build_equation(const ExperimentConfig& cfg) {
  if (cfg.model) {
    const auto& m = *cfg.model;
    if (m.name == "thermal_qubit") return models::thermal_qubit(m.g, m.beta, m.omega, m.drive, m.frequency);
    if (m.name == "negative_rate_qubit") return models::negative_rate_qubit();
    return models::single_decay_qubit(m.w);
  }
  if (cfg.channels.empty()) return models::thermal_qubit();

  const Index d = cfg.dim;
  std::vector<std::pair<ComplexMatrix, RateProfile>> hterms;
  for (const auto& h : cfg.hamiltonian) hterms.emplace_back(parse_operator(h.op, d), parse_profile(h.coeff));
  MatrixProfile hamiltonian = [hterms, d](double t) {
    ComplexMatrix H = ComplexMatrix::Zero(d, d);
    for (const auto& [op, f] : hterms) H += f(t) * op;
    return H;
  };
  std::vector<Channel> channels;
  ComplexMatrix povm = ComplexMatrix::Zero(d, d);
  for (const auto& c : cfg.channels) {
    const ComplexMatrix L = parse_operator(c.op, d);
    povm += L.adjoint() * L;
    channels.push_back({constant_matrix(L), parse_profile(c.coeff)});
  }
  const double g = cfg.povm_constant ? *cfg.povm_constant : povm.trace().real() / static_cast<double>(d);
  return CanonicalMasterEquation(d, std::move(hamiltonian), std::move(channels), g, cfg.canonical);
}

ComplexMatrix build_initial_state(const ExperimentConfig& cfg) {
  const Index d = cfg.dim;
  const Call call = parse_call(cfg.initial_state);
  ComplexMatrix rho;
  if (call.name == "excited" && !call.has_args) {
    rho = ComplexMatrix::Zero(d, d);
    rho(0, 0) = 1.0;
  } else if (call.name == "ground" && !call.has_args) {
    rho = ComplexMatrix::Zero(d, d);
    rho(d - 1, d - 1) = 1.0;
  } else if (call.name == "maximally_mixed" && !call.has_args) {
    rho = ComplexMatrix::Identity(d, d) / static_cast<double>(d);
  } else if (call.name == "psi") {
    StateVector psi(d);
    const auto args = split_args(call.args);
    if (static_cast<Index>(args.size()) != d) throw std::invalid_argument("psi needs dim entries");
    for (Index i = 0; i < d; ++i) psi(i) = parse_complex(args[static_cast<std::size_t>(i)]);
    if (!(psi.norm() > 0.0)) throw std::invalid_argument("psi is zero");
    psi.normalize();
    rho = psi * psi.adjoint();
  } else if (call.name == "matrix") {
    rho = parse_matrix(call.args);
    if (rho.rows() != d || rho.cols() != d) throw std::invalid_argument("state has wrong dimension");
    const DensityCheck chk = check_density({rho, 1.0});
    if (!chk.ok(cfg.tolerances) || chk.min_eigenvalue < -cfg.tolerances.psd_slack)
      throw std::invalid_argument("state is not a density matrix");
  } else {
    throw std::invalid_argument("unknown initial state '" + cfg.initial_state + "'");
  }
  return rho;
}

}  // namespace cbu
