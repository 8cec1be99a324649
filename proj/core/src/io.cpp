#include "polariscope/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polariscope {

using Json = nlohmann::ordered_json;

std::string convention_description() {
    return "zyz-active;condon-shortley;D(m,0)=sqrt(4pi/(2L+1))Y*;"
           "schur-weight=(-1)^(K-q);schur-assembly=conj(Y),sqrt(4pi/(2L+1));"
           "interdirection-angle=cos(dphi);first-order=verbatim-with-converter;"
           "basis=m-descending;jones:q=R.diag(1,i).Rt,h=R.diag(1,-1).Rt,det=+1";
}

std::string convention_fingerprint() {
    // FNV-1a 64 over the description string.
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : convention_description()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {

Json manifest_to_json(const RunManifest& m) {
    Json j;
    j["command"] = m.command;
    j["inputs"] = m.inputs;
    j["output"] = m.output;
    j["seed"] = m.seed;
    j["shots"] = m.shots;
    j["K_x2"] = m.k_x2;
    j["mode"] = m.mode;
    j["lambda"] = m.lambda;
    j["psd_project"] = m.psd_project;
    j["tool_version"] = m.tool_version;
    j["convention_fingerprint"] = m.fingerprint;
    return j;
}

Json complex_matrix_to_json(const Eigen::MatrixXcd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXcd complex_matrix_from_json(const Json& j) {
    const size_t rows = j.size();
    if (rows == 0) return Eigen::MatrixXcd(0, 0);
    const size_t cols = j.at(0).size();
    Eigen::MatrixXcd m(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw IoError("ragged complex matrix");
        for (size_t k = 0; k < cols; ++k) {
            const auto& cell = j.at(i).at(k);
            if (!cell.is_array() || cell.size() != 2)
                throw IoError("complex entries must be [re, im] pairs");
            m(i, k) = Complex(cell.at(0).get<double>(), cell.at(1).get<double>());
        }
    }
    return m;
}

Json parse(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("JSON parse failure: ") + e.what());
    }
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed document: ") + e.what());
    }
}

} // namespace

std::string state_to_json(const TwoModeState& state, const RunManifest* manifest) {
    Json j;
    if (manifest) j["manifest"] = manifest_to_json(*manifest);
    Json layers = Json::array();
    for (const auto& layer : state.layers) {
        Json l;
        l["spin_x2"] = layer.spin.twice;
        l["weight"] = layer.weight;
        l["rho"] = complex_matrix_to_json(layer.rho);
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    if (!state.coherences.empty()) {
        Json blocks = Json::array();
        for (const auto& [key, block] : state.coherences) {
            Json b;
            b["bra_spin_x2"] = key.first;
            b["ket_spin_x2"] = key.second;
            b["block"] = complex_matrix_to_json(block);
            blocks.push_back(std::move(b));
        }
        j["coherences"] = std::move(blocks);
    }
    return j.dump(2) + "\n";
}

TwoModeState state_from_json(const std::string& text) {
    const Json j = parse(text);
    return guarded([&] {
        TwoModeState state;
        for (const auto& l : j.at("layers")) {
            LayerState layer;
            layer.spin = HalfInt::from_twice(l.at("spin_x2").get<int>());
            layer.weight = l.at("weight").get<double>();
            layer.rho = complex_matrix_from_json(l.at("rho"));
            state.layers.push_back(std::move(layer));
        }
        if (j.contains("coherences")) {
            for (const auto& b : j.at("coherences")) {
                const int lo = b.at("bra_spin_x2").get<int>();
                const int hi = b.at("ket_spin_x2").get<int>();
                state.coherences[{lo, hi}] = complex_matrix_from_json(b.at("block"));
            }
        }
        state.validate();
        return state;
    });
}

std::string directions_to_json(const DirectionSet& set, const RunManifest* manifest) {
    Json j;
    if (manifest) j["manifest"] = manifest_to_json(*manifest);
    j["L"] = set.L;
    Json dirs = Json::array();
    for (const auto& d : set.directions) {
        Json e;
        e["theta"] = d.theta;
        e["phi"] = d.phi;
        dirs.push_back(std::move(e));
    }
    j["directions"] = std::move(dirs);
    j["min_line_angle_deg"] = set.min_line_angle * 180.0 / kPi;
    j["cond_P"] = set.cond_P;
    j["cond_Y"] = set.cond_Y;
    return j.dump(2) + "\n";
}

DirectionSet directions_from_json(const std::string& text) {
    const Json j = parse(text);
    return guarded([&] {
        DirectionSet set;
        set.L = j.at("L").get<int>();
        for (const auto& d : j.at("directions"))
            set.directions.push_back(
                Direction{d.at("theta").get<double>(), d.at("phi").get<double>()});
        if (j.contains("min_line_angle_deg"))
            set.min_line_angle = j.at("min_line_angle_deg").get<double>() * kPi / 180.0;
        if (j.contains("cond_P")) set.cond_P = j.at("cond_P").get<double>();
        if (j.contains("cond_Y")) set.cond_Y = j.at("cond_Y").get<double>();
        if (static_cast<int>(set.directions.size()) != 2 * set.L + 1)
            throw IoError("direction set must contain exactly 2L+1 directions");
        return set;
    });
}

std::string measurements_to_json(const std::vector<MeasurementRecord>& records,
                                 const RunManifest* manifest) {
    Json j;
    if (manifest) j["manifest"] = manifest_to_json(*manifest);
    Json recs = Json::array();
    for (const auto& rec : records) {
        Json r;
        r["K_x2"] = rec.K.twice;
        r["theta"] = rec.direction.theta;
        r["phi"] = rec.direction.phi;
        if (rec.psi) r["psi"] = *rec.psi;
        if (rec.shots) r["shots"] = *rec.shots;
        Json values;
        for (int i = 0; i < rec.K.multiplicity(); ++i) {
            const int q_x2 = rec.K.twice - 2 * i;
            const double err = (i < static_cast<int>(rec.std_errors.size()))
                                   ? rec.std_errors[i]
                                   : 0.0;
            values[std::to_string(q_x2)] = Json::array({rec.values.at(i), err});
        }
        r["values"] = std::move(values);
        recs.push_back(std::move(r));
    }
    j["records"] = std::move(recs);
    return j.dump(2) + "\n";
}

std::vector<MeasurementRecord> measurements_from_json(const std::string& text) {
    const Json j = parse(text);
    return guarded([&] {
        std::vector<MeasurementRecord> records;
        for (const auto& r : j.at("records")) {
            MeasurementRecord rec;
            rec.K = HalfInt::from_twice(r.at("K_x2").get<int>());
            rec.direction = Direction{r.at("theta").get<double>(), r.at("phi").get<double>()};
            if (r.contains("psi")) rec.psi = r.at("psi").get<double>();
            if (r.contains("shots")) rec.shots = r.at("shots").get<long long>();
            rec.values.assign(rec.K.multiplicity(), 0.0);
            rec.std_errors.assign(rec.K.multiplicity(), 0.0);
            const auto& values = r.at("values");
            for (int i = 0; i < rec.K.multiplicity(); ++i) {
                const std::string key = std::to_string(rec.K.twice - 2 * i);
                if (!values.contains(key))
                    throw IoError("record missing intensity value for q_x2 = " + key);
                const auto& pair = values.at(key);
                rec.values[i] = pair.at(0).get<double>();
                rec.std_errors[i] = pair.at(1).get<double>();
            }
            records.push_back(std::move(rec));
        }
        return records;
    });
}

std::string results_to_json(const std::vector<ReconstructionResult>& results,
                            const RunManifest* manifest) {
    Json j;
    if (manifest) j["manifest"] = manifest_to_json(*manifest);
    Json arr = Json::array();
    for (const auto& res : results) {
        Json r;
        r["K_x2"] = res.diag.K.twice;
        r["mode"] = res.diag.mode;
        r["residual"] = res.diag.residual;
        Json cond;
        for (const auto& [L, c] : res.diag.cond_P) cond[std::to_string(L)] = c;
        r["cond_P"] = std::move(cond);
        r["psd_projected"] = res.diag.psd_projected;
        r["G"] = complex_matrix_to_json(res.G.g);
        if (res.diag.mode == "lsq") {
            r["cond_design"] = res.diag.cond_design;
            r["std_errors"] = res.diag.param_std_errors;
        }
        if (!res.diag.warnings.empty()) r["warnings"] = res.diag.warnings;
        arr.push_back(std::move(r));
    }
    j["results"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::vector<ReconstructionResult> results_from_json(const std::string& text) {
    const Json j = parse(text);
    return guarded([&] {
        std::vector<ReconstructionResult> results;
        for (const auto& r : j.at("results")) {
            ReconstructionResult res;
            res.diag.K = HalfInt::from_twice(r.at("K_x2").get<int>());
            res.diag.mode = r.at("mode").get<std::string>();
            res.diag.residual = r.at("residual").get<double>();
            for (const auto& [key, value] : r.at("cond_P").items())
                res.diag.cond_P[std::stoi(key)] = value.get<double>();
            res.diag.psd_projected = r.at("psd_projected").get<bool>();
            res.G.K = res.diag.K;
            res.G.g = complex_matrix_from_json(r.at("G"));
            if (r.contains("cond_design"))
                res.diag.cond_design = r.at("cond_design").get<double>();
            if (r.contains("std_errors"))
                res.diag.param_std_errors = r.at("std_errors").get<std::vector<double>>();
            results.push_back(std::move(res));
        }
        return results;
    });
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path + " failed: " + ec.message());
}

} // namespace polariscope
