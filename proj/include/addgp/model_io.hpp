#pragma once

// Text persistence for trained models. One "key values..." record per line:
//
//   addgp-model 1
//   kernel additive            (or hull)
//   ...hyperparameters, noise, standardization...
//   train_input x_1 ... x_D    (one line per training point)
//   dual_weights a_1 ... a_N
//   nll_checksum v
//   end
//
// The Cholesky factor is not stored. Loading refactorizes K + noise I + jitter I
// and compares the recomputed NLL against nll_checksum.

#include "addgp/error.hpp"
#include "addgp/gp.hpp"
#include "addgp/hyperopt.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace addgp {

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kModelChecksumTolerance = 1e-6;

namespace detail {

inline void write_values(std::ostream& os, const char* key, const auto& values) {
    os << key;
    for (auto v : values) os << ' ' << v;
    os << '\n';
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

template <CovarianceKernel K>
void write_common(std::ostream& os, const TrainedModel<K>& m) {
    os << "noise_variance " << m.noise.noise_variance << '\n';
    os << "constant_mean " << m.noise.constant_mean << '\n';
    os << "jitter " << m.jitter << '\n';
    write_values(os, "input_means", to_std(m.standardization.input_means));
    write_values(os, "input_stds", to_std(m.standardization.input_stds));
    os << "target_mean " << m.standardization.target_mean << '\n';
    os << "target_std " << m.standardization.target_std << '\n';
    if (!m.column_names.empty()) {
        os << "column_names ";
        for (std::size_t i = 0; i < m.column_names.size(); ++i) os << (i ? "," : "") << m.column_names[i];
        os << '\n';
    }
    os << "final_nll " << m.diagnostics.final_nll << '\n';
    os << "iterations " << m.diagnostics.iterations << '\n';
    os << "restart_index " << m.diagnostics.restart_index << '\n';
    os << "converged " << (m.diagnostics.converged ? 1 : 0) << '\n';
    os << "n_train " << m.train_inputs.rows() << '\n';
    for (Eigen::Index i = 0; i < m.train_inputs.rows(); ++i) {
        os << "train_input";
        for (Eigen::Index d = 0; d < m.train_inputs.cols(); ++d) os << ' ' << m.train_inputs(i, d);
        os << '\n';
    }
    write_values(os, "dual_weights", to_std(m.dual_weights));
    os << "nll_checksum " << model_nll(m) << '\n';
    os << "end\n";
}

struct Record {
    std::map<std::string, std::string> fields;
    std::vector<std::string> train_rows;

    const std::string& get(const std::string& key) const {
        const auto it = fields.find(key);
        if (it == fields.end()) throw ModelFormatError("model file: missing field '" + key + "'");
        return it->second;
    }
    bool has(const std::string& key) const { return fields.count(key) != 0; }
};

inline std::vector<double> parse_reals(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ModelFormatError("model file: bad number '" + tok + "' in field '" + key + "'");
        out.push_back(v);
    }
    return out;
}

inline double parse_real(const Record& r, const std::string& key) {
    const auto v = parse_reals(r.get(key), key);
    if (v.size() != 1) throw ModelFormatError("model file: field '" + key + "' must hold one number");
    return v[0];
}

inline Eigen::VectorXd parse_vector(const Record& r, const std::string& key, std::size_t expected) {
    const auto v = parse_reals(r.get(key), key);
    if (v.size() != expected)
        throw ModelFormatError("model file: field '" + key + "' has " + std::to_string(v.size()) + " values, expected " +
                               std::to_string(expected));
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline int parse_int(const Record& r, const std::string& key) {
    const double v = parse_real(r, key);
    if (v != std::floor(v)) throw ModelFormatError("model file: field '" + key + "' must be an integer");
    return static_cast<int>(v);
}

template <CovarianceKernel K>
TrainedModel<K> rebuild(const Record& r, K kernel) {
    const int D = kernel.dims();
    const auto n = static_cast<std::size_t>(parse_int(r, "n_train"));
    if (n == 0 || r.train_rows.size() != n)
        throw ModelFormatError("model file: expected " + std::to_string(n) + " train_input rows, found " +
                               std::to_string(r.train_rows.size()));
    RowMatrix x(static_cast<Eigen::Index>(n), D);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = parse_reals(r.train_rows[i], "train_input");
        if (row.size() != static_cast<std::size_t>(D)) throw ModelFormatError("model file: train_input row has wrong width");
        for (int d = 0; d < D; ++d) x(static_cast<Eigen::Index>(i), d) = row[static_cast<std::size_t>(d)];
    }
    NoiseModel noise{parse_real(r, "noise_variance"), parse_real(r, "constant_mean")};
    const double jitter = parse_real(r, "jitter");
    StandardizationStats stats{parse_vector(r, "input_means", static_cast<std::size_t>(D)),
                               parse_vector(r, "input_stds", static_cast<std::size_t>(D)), parse_real(r, "target_mean"),
                               parse_real(r, "target_std")};
    Eigen::VectorXd alpha = parse_vector(r, "dual_weights", n);

    Eigen::MatrixXd ky = gram(x, kernel);
    ky.diagonal().array() += noise.noise_variance + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(ky);
    if (llt.info() != Eigen::Success) throw ModelFormatError("model file: stored covariance does not factorize");

    TrainedModel<K> m{std::move(kernel), noise, std::move(x), llt.matrixL(), jitter, std::move(alpha), std::move(stats), {}, {}};
    m.diagnostics.final_nll = parse_real(r, "final_nll");
    m.diagnostics.iterations = parse_int(r, "iterations");
    m.diagnostics.restart_index = parse_int(r, "restart_index");
    m.diagnostics.converged = parse_int(r, "converged") != 0;
    if (r.has("column_names")) {
        std::string names = r.get("column_names");
        std::size_t start = 0;
        while (true) {
            const auto comma = names.find(',', start);
            m.column_names.push_back(names.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    const double checksum = parse_real(r, "nll_checksum");
    const double recomputed = model_nll(m);
    if (!(std::abs(recomputed - checksum) <= kModelChecksumTolerance))
        throw ModelFormatError("model file: NLL checksum mismatch (stored " + std::to_string(checksum) + ", recomputed " +
                               std::to_string(recomputed) + ")");
    return m;
}

} // namespace detail

inline void save_model(std::ostream& os, const TrainedModel<AdditiveKernelSpec>& m) {
    os << std::setprecision(17);
    os << "addgp-model " << kModelFormatVersion << '\n';
    os << "kernel additive\n";
    os << "dims " << m.kernel.dims() << '\n';
    os << "esp " << to_string(m.kernel.esp_method()) << '\n';
    os << "min_order " << m.kernel.min_order() << '\n';
    detail::write_values(os, "order_variances", m.kernel.order_variances().values());
    detail::write_values(os, "length_scales", m.kernel.length_scales().values());
    detail::write_common(os, m);
}

inline void save_model(std::ostream& os, const TrainedModel<HullKernelSpec>& m) {
    os << std::setprecision(17);
    os << "addgp-model " << kModelFormatVersion << '\n';
    os << "kernel hull\n";
    os << "dims " << m.kernel.dims() << '\n';
    os << "amplitude " << m.kernel.amplitude() << '\n';
    os << "alpha " << m.kernel.alpha() << '\n';
    detail::write_values(os, "length_scales", m.kernel.length_scales().values());
    detail::write_common(os, m);
}

inline void save_model(std::ostream& os, const AnyModel& m) {
    std::visit([&](const auto& model) { save_model(os, model); }, m);
}

inline AnyModel load_model(std::istream& is) {
    detail::Record r;
    std::string line;
    bool header = false, ended = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string value = sp == std::string::npos ? std::string() : line.substr(sp + 1);
        if (!header) {
            if (key != "addgp-model") throw ModelFormatError("not an addgp model file");
            if (value != std::to_string(kModelFormatVersion))
                throw ModelFormatError("unsupported model format version '" + value + "'");
            header = true;
            continue;
        }
        if (key == "end") {
            ended = true;
            break;
        }
        if (key == "train_input")
            r.train_rows.push_back(value);
        else
            r.fields[key] = value;
    }
    if (!header) throw ModelFormatError("empty model file");
    if (!ended) throw ModelFormatError("model file is truncated (no 'end' record)");

    const int D = detail::parse_int(r, "dims");
    if (D < 1) throw ModelFormatError("model file: dims must be >= 1");
    const auto ls = detail::parse_reals(r.get("length_scales"), "length_scales");
    if (ls.size() != static_cast<std::size_t>(D)) throw ModelFormatError("model file: length_scales has wrong size");
    try {
        const std::string& kind = r.get("kernel");
        if (kind == "additive") {
            AdditiveKernelSpec spec(LengthScales(ls), OrderVariances(detail::parse_reals(r.get("order_variances"), "order_variances")),
                                    detail::parse_int(r, "min_order"), parse_esp_method(r.get("esp")));
            return detail::rebuild(r, std::move(spec));
        }
        if (kind == "hull") {
            HullKernelSpec spec(detail::parse_real(r, "amplitude"), detail::parse_real(r, "alpha"), LengthScales(ls));
            return detail::rebuild(r, std::move(spec));
        }
        throw ModelFormatError("model file: unknown kernel '" + kind + "'");
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const std::string& path, const AnyModel& m) {
    std::ostringstream os;
    save_model(os, m);
    std::ofstream out(path);
    if (!out) throw FileError("cannot write model to '" + path + "'");
    out << os.str();
}

inline AnyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open model file '" + path + "'");
    return load_model(in);
}

} // namespace addgp
