#include "pomdp/model.hpp"

#include "pomdp/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace pomdp {

namespace {

using nlohmann::json;

constexpr double kStochasticTol = 1e-12;
constexpr double kRenormalizeTol = 1e-9;

std::string index_name(const std::string& base, std::initializer_list<long> idx) {
    std::ostringstream os;
    os << base;
    for (long i : idx) os << '[' << i << ']';
    return os.str();
}

void check_probability_row(const Eigen::Ref<const Vector>& row, const std::string& name,
                           ValidationReport& report) {
    for (Eigen::Index k = 0; k < row.size(); ++k) {
        // !(v >= 0) also rejects NaN.
        if (!(row[k] >= 0.0)) {
            report.violations.push_back({name, "negative probability", row[k]});
            return;
        }
    }
    const double s = row.sum();
    if (std::abs(s - 1.0) > kStochasticTol)
        report.violations.push_back({name, "row does not sum to 1", s - 1.0});
}

// Rows within the input tolerance of stochastic are rescaled; exact-enough
// rows are left untouched so that save/load round trips are bit-identical.
void renormalize_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double s = m.row(r).sum();
        const double gap = std::abs(s - 1.0);
        if (gap > kStochasticTol && gap <= kRenormalizeTol && m.row(r).minCoeff() >= 0.0) m.row(r) /= s;
    }
}

void renormalize_vector(Vector& v) {
    const double s = v.sum();
    const double gap = std::abs(s - 1.0);
    if (gap > kStochasticTol && gap <= kRenormalizeTol && v.minCoeff() >= 0.0) v /= s;
}

Matrix matrix_from_json(const json& j, long rows, long cols, const std::string& name) {
    if (!j.is_array() || static_cast<long>(j.size()) != rows)
        throw std::invalid_argument("dimension mismatch in '" + name + "': expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<long>(row.size()) != cols)
            throw std::invalid_argument("dimension mismatch in '" + name + "' row " + std::to_string(r) +
                                        ": expected " + std::to_string(cols) + " entries");
        for (long c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

int positive_int(const json& doc, const char* key) {
    if (!doc.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
    const int v = doc.at(key).get<int>();
    if (v <= 0) throw std::invalid_argument(std::string("field '") + key + "' must be positive");
    return v;
}

}  // namespace

std::string ValidationReport::summary() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].field << ": " << violations[i].description << " (" << violations[i].magnitude << ")";
    }
    return os.str();
}

ModelValidationError::ModelValidationError(ValidationReport report)
    : ValidationError("model validation failed: " + report.summary()), report_(std::move(report)) {}

ValidationReport validate(const FinitePOMDP& m) {
    ValidationReport report;
    auto add = [&](std::string field, std::string what, double mag) {
        report.violations.push_back({std::move(field), std::move(what), mag});
    };
    if (m.n_states <= 0 || m.n_obs <= 0 || m.n_actions <= 0) {
        add("dims", "dimensions must be positive", 0.0);
        return report;
    }
    if (static_cast<int>(m.transition.size()) != m.n_actions) {
        add("transition", "one matrix per action required", static_cast<double>(m.transition.size()));
        return report;
    }
    for (int u = 0; u < m.n_actions; ++u) {
        const Matrix& t = m.transition[static_cast<std::size_t>(u)];
        if (t.rows() != m.n_states || t.cols() != m.n_states) {
            add(index_name("transition", {u}), "dimension mismatch", static_cast<double>(t.rows()));
            continue;
        }
        for (int x = 0; x < m.n_states; ++x) check_probability_row(t.row(x).transpose(), index_name("transition", {u, x}), report);
    }
    if (m.observation.rows() != m.n_states || m.observation.cols() != m.n_obs) {
        add("observation", "dimension mismatch", static_cast<double>(m.observation.rows()));
    } else {
        for (int x = 0; x < m.n_states; ++x)
            check_probability_row(m.observation.row(x).transpose(), index_name("observation", {x}), report);
    }
    if (m.cost.rows() != m.n_states || m.cost.cols() != m.n_actions) {
        add("cost", "dimension mismatch", static_cast<double>(m.cost.rows()));
    } else {
        for (int x = 0; x < m.n_states; ++x)
            for (int u = 0; u < m.n_actions; ++u) {
                const double c = m.cost(x, u);
                if (!(c >= 0.0)) add(index_name("cost", {x, u}), "cost negative", c);
                else if (!(c <= m.c_max)) add(index_name("cost", {x, u}), "cost exceeds c_max", c - m.c_max);
            }
    }
    if (!(m.discount > 0.0 && m.discount < 1.0)) add("discount", "discount must lie in (0, 1)", m.discount);
    if (m.prior.size() != m.n_states) add("prior", "dimension mismatch", static_cast<double>(m.prior.size()));
    else check_probability_row(m.prior, "prior", report);

    const Matrix& d = m.state_metric;
    if (d.rows() != m.n_states || d.cols() != m.n_states) {
        add("state_metric", "dimension mismatch", static_cast<double>(d.rows()));
    } else {
        for (int i = 0; i < m.n_states; ++i) {
            if (d(i, i) != 0.0) add(index_name("state_metric", {i, i}), "nonzero diagonal", d(i, i));
            for (int j = 0; j < m.n_states; ++j) {
                if (i != j && !(d(i, j) > 0.0)) add(index_name("state_metric", {i, j}), "off-diagonal entry not positive", d(i, j));
                if (d(i, j) != d(j, i)) add(index_name("state_metric", {i, j}), "not symmetric", d(i, j) - d(j, i));
                for (int k = 0; k < m.n_states; ++k) {
                    const double excess = d(i, k) - d(i, j) - d(j, k);
                    if (excess > 1e-12) add(index_name("state_metric", {i, j, k}), "triangle inequality violated", excess);
                }
            }
        }
    }
    return report;
}

void require_valid(const FinitePOMDP& model) {
    ValidationReport report = validate(model);
    if (!report.ok()) throw ModelValidationError(std::move(report));
}

Matrix discrete_metric(int n) {
    Matrix d = Matrix::Ones(n, n);
    d.diagonal().setZero();
    return d;
}

FinitePOMDP parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("model parse failure: ") + e.what());
    }
    FinitePOMDP m;
    try {
        m.n_states = positive_int(doc, "n_states");
        m.n_obs = positive_int(doc, "n_obs");
        m.n_actions = positive_int(doc, "n_actions");
        for (const char* key : {"discount", "prior", "cost", "transition", "observation"})
            if (!doc.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
        m.discount = doc.at("discount").get<double>();
        const auto prior = doc.at("prior").get<std::vector<double>>();
        if (static_cast<int>(prior.size()) != m.n_states) throw std::invalid_argument("dimension mismatch in 'prior'");
        m.prior = Eigen::Map<const Vector>(prior.data(), m.n_states);
        m.cost = matrix_from_json(doc.at("cost"), m.n_states, m.n_actions, "cost");
        const json& t = doc.at("transition");
        if (!t.is_array() || static_cast<int>(t.size()) != m.n_actions)
            throw std::invalid_argument("dimension mismatch in 'transition': expected one matrix per action");
        for (int u = 0; u < m.n_actions; ++u)
            m.transition.push_back(matrix_from_json(t[static_cast<std::size_t>(u)], m.n_states, m.n_states,
                                                    index_name("transition", {u})));
        m.observation = matrix_from_json(doc.at("observation"), m.n_states, m.n_obs, "observation");
        m.state_metric = doc.contains("state_metric")
                             ? matrix_from_json(doc.at("state_metric"), m.n_states, m.n_states, "state_metric")
                             : discrete_metric(m.n_states);
        m.c_max = doc.contains("c_max") ? doc.at("c_max").get<double>() : std::max(0.0, m.cost.maxCoeff());
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("model parse failure: ") + e.what());
    }
    for (auto& t : m.transition) renormalize_rows(t);
    renormalize_rows(m.observation);
    renormalize_vector(m.prior);
    require_valid(m);
    return m;
}

FinitePOMDP load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open model file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

std::string serialize_model(const FinitePOMDP& m) {
    json doc;
    doc["n_states"] = m.n_states;
    doc["n_obs"] = m.n_obs;
    doc["n_actions"] = m.n_actions;
    doc["discount"] = m.discount;
    doc["prior"] = std::vector<double>(m.prior.data(), m.prior.data() + m.prior.size());
    doc["cost"] = matrix_to_json(m.cost);
    json t = json::array();
    for (const auto& k : m.transition) t.push_back(matrix_to_json(k));
    doc["transition"] = std::move(t);
    doc["observation"] = matrix_to_json(m.observation);
    doc["state_metric"] = matrix_to_json(m.state_metric);
    doc["c_max"] = m.c_max;
    return doc.dump(2) + "\n";
}

void save_model(const FinitePOMDP& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write model file '" + path + "'");
    out << serialize_model(model);
}

FinitePOMDP make_fully_observed(const std::vector<Matrix>& transition, const Matrix& cost, double discount,
                                const Vector& prior) {
    FinitePOMDP m;
    m.n_states = static_cast<int>(prior.size());
    m.n_obs = m.n_states;
    m.n_actions = static_cast<int>(transition.size());
    m.transition = transition;
    m.observation = Matrix::Identity(m.n_states, m.n_states);
    m.cost = cost;
    m.discount = discount;
    m.prior = prior;
    m.state_metric = discrete_metric(m.n_states);
    m.c_max = cost.size() > 0 ? std::max(0.0, cost.maxCoeff()) : 0.0;
    require_valid(m);
    return m;
}

FinitePOMDP make_mixing_example(double eps, ModelDims dims, std::uint64_t seed) {
    if (dims.n_states <= 0 || dims.n_obs <= 0 || dims.n_actions <= 0)
        throw std::invalid_argument("make_mixing_example: dimensions must be positive");
    const int widest = std::max(dims.n_states, dims.n_obs);
    if (!(eps > 0.0) || eps * widest > 1.0 + 1e-15)
        throw std::invalid_argument("make_mixing_example: eps must lie in (0, 1/" + std::to_string(widest) + "]");
    Rng rng(seed, 0x6d6978);
    auto draw_row = [&](int n) {
        Vector w(n);
        for (int i = 0; i < n; ++i) w[i] = rng.exponential();
        w /= w.sum();
        Vector row = Vector::Constant(n, eps) + (1.0 - n * eps) * w;
        return Vector(row / row.sum());
    };
    FinitePOMDP m;
    m.n_states = dims.n_states;
    m.n_obs = dims.n_obs;
    m.n_actions = dims.n_actions;
    for (int u = 0; u < m.n_actions; ++u) {
        Matrix t(m.n_states, m.n_states);
        for (int x = 0; x < m.n_states; ++x) t.row(x) = draw_row(m.n_states).transpose();
        m.transition.push_back(std::move(t));
    }
    m.observation.resize(m.n_states, m.n_obs);
    for (int x = 0; x < m.n_states; ++x) m.observation.row(x) = draw_row(m.n_obs).transpose();
    m.cost.resize(m.n_states, m.n_actions);
    for (int x = 0; x < m.n_states; ++x)
        for (int u = 0; u < m.n_actions; ++u) m.cost(x, u) = rng.uniform();
    m.c_max = 1.0;
    m.discount = 0.9;
    m.prior = Vector::Constant(m.n_states, 1.0 / m.n_states);
    m.state_metric = discrete_metric(m.n_states);
    require_valid(m);
    return m;
}

FinitePOMDP make_m1() {
    FinitePOMDP m;
    m.n_states = 2;
    m.n_obs = 2;
    m.n_actions = 2;
    Matrix t0(2, 2), t1(2, 2);
    t0 << 0.7, 0.3, 0.3, 0.7;
    t1 << 0.5, 0.5, 0.5, 0.5;
    m.transition = {t0, t1};
    m.observation.resize(2, 2);
    m.observation << 0.8, 0.2, 0.2, 0.8;
    m.cost.resize(2, 2);
    m.cost << 0, 1, 1, 0;
    m.discount = 0.9;
    m.prior = Vector::Constant(2, 0.5);
    m.state_metric = discrete_metric(2);
    m.c_max = 1.0;
    return m;
}

bool is_control_free(const FinitePOMDP& model) {
    for (int u = 1; u < model.n_actions; ++u)
        if (model.kernel(u) != model.kernel(0)) return false;
    return true;
}

FinitePOMDP with_observation(FinitePOMDP model, const Matrix& observation) {
    model.observation = observation;
    model.n_obs = static_cast<int>(observation.cols());
    require_valid(model);
    return model;
}

}  // namespace pomdp
