#include "commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "polariscope/parallel.hpp"

namespace polariscope::cli {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::vector<Complex> parse_amplitudes(const std::string& text) {
    std::vector<Complex> amps;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) throw std::invalid_argument("empty amplitude token");
        const auto colon = token.find(':');
        if (colon == std::string::npos) {
            amps.push_back(Complex(std::stod(token), 0.0));
        } else {
            amps.push_back(Complex(std::stod(token.substr(0, colon)),
                                   std::stod(token.substr(colon + 1))));
        }
    }
    if (amps.empty()) throw std::invalid_argument("no amplitudes given");
    return amps;
}

std::vector<int> k_list_x2(const std::vector<double>& k_values) {
    std::vector<int> out;
    for (double k : k_values) out.push_back(HalfInt::from_value(k).twice);
    return out;
}

} // namespace

int cmd_gen_state(const GenStateArgs& args) {
    TwoModeState state;
    if (args.family == "pure-layer") {
        const HalfInt spin = HalfInt::from_value(args.spin);
        const std::vector<Complex> amps = parse_amplitudes(args.amps);
        Eigen::VectorXcd v(static_cast<Eigen::Index>(amps.size()));
        for (size_t i = 0; i < amps.size(); ++i) v(static_cast<Eigen::Index>(i)) = amps[i];
        state = single_layer(pure_layer_state(spin, v));
    } else if (args.family == "random") {
        const HalfInt spin = HalfInt::from_value(args.spin);
        const int rank = (args.rank > 0) ? args.rank : spin.multiplicity();
        state = single_layer(random_layer_state(spin, rank, args.seed));
    } else if (args.family == "noon") {
        if (args.noon_n < 1) throw std::invalid_argument("noon: --n must be >= 1");
        const HalfInt spin = HalfInt::from_twice(args.noon_n);
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(spin.multiplicity());
        v(0) = 1.0;
        v(spin.multiplicity() - 1) = 1.0;
        state = single_layer(pure_layer_state(spin, v));
    } else if (args.family == "manual") {
        if (args.input.empty()) throw std::invalid_argument("manual: --input is required");
        state = state_from_json(read_text_file(args.input));
    } else {
        throw std::invalid_argument("unknown state family '" + args.family +
                                    "' (expected pure-layer | random | noon | manual)");
    }
    state.validate();

    RunManifest manifest;
    manifest.command = "gen-state";
    if (!args.input.empty()) manifest.inputs.push_back(args.input);
    manifest.output = args.out;
    manifest.seed = args.seed;
    manifest.mode = args.family;
    atomic_write_text(args.out, state_to_json(state, &manifest));

    for (const auto& layer : state.layers)
        std::printf("layer spin %s: weight %.12g\n", layer.spin.str().c_str(), layer.weight);
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
}

int cmd_directions(const DirectionsArgs& args) {
    const DirectionSet set = design_directions(args.L, args.seed);

    RunManifest manifest;
    manifest.command = "directions";
    manifest.output = args.out;
    manifest.seed = args.seed;
    manifest.mode = "design";
    atomic_write_text(args.out, directions_to_json(set, &manifest));

    std::printf("L=%d: %zu directions, min line angle %.6f deg, cond(P_%d) = %.6g\n", set.L,
                set.directions.size(), set.min_line_angle * 180.0 / kPi, set.L, set.cond_P);
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
}

int cmd_simulate(const SimulateArgs& args) {
    if (args.noiseless == (args.shots > 0))
        throw std::invalid_argument("simulate: pass either --shots N (N >= 1) or --noiseless");
    if (args.k_values.empty()) throw std::invalid_argument("simulate: at least one --K required");

    const TwoModeState state = state_from_json(read_text_file(args.state_file));

    std::map<int, DirectionSet> sets;
    for (const auto& path : args.direction_files) {
        DirectionSet set = directions_from_json(read_text_file(path));
        sets[set.L] = std::move(set);
    }

    std::vector<int> k_x2 = k_list_x2(args.k_values);
    std::sort(k_x2.begin(), k_x2.end());
    k_x2.erase(std::unique(k_x2.begin(), k_x2.end()), k_x2.end());

    // Coverage check: each order K needs direction sets for L = 0 ... 2K.
    std::string missing;
    for (int L = 0; L <= k_x2.back(); ++L)
        if (!sets.count(L)) missing += (missing.empty() ? "" : ", ") + std::to_string(L);
    if (!missing.empty())
        throw std::invalid_argument("simulate: missing direction sets for orders L = " + missing);

    struct Slot {
        HalfInt K;
        Direction dir;
    };
    std::vector<Slot> slots;
    for (int twoK : k_x2) {
        const HalfInt K = HalfInt::from_twice(twoK);
        for (int L = 0; L <= twoK; ++L)
            for (const auto& dir : sets.at(L).directions) slots.push_back({K, dir});
    }

    std::vector<MeasurementRecord> records(slots.size());
    parallel_for(slots.size(), [&](size_t i) {
        const auto& [K, dir] = slots[i];
        MeasurementRecord rec;
        rec.K = K;
        rec.direction = dir;
        rec.psi = 0.0;
        rec.values.resize(K.multiplicity());
        rec.std_errors.assign(K.multiplicity(), 0.0);
        const EulerAngles g{dir.phi, dir.theta, 0.0};
        if (args.noiseless) {
            for (int a = 0; a < K.multiplicity(); ++a) {
                const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
                rec.values[a] = intensity_moment_direct(state, TensorIndex(K, q), g);
            }
        } else {
            rec.shots = args.shots;
            // One independent batch per moment, so per-record errors really are
            // independent the way the downstream least-squares model assumes.
            for (int a = 0; a < K.multiplicity(); ++a) {
                const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
                const auto draws = sample_counts(state, euler_inverse(g), args.shots,
                                                 splitmix64(args.seed ^ (i * 64 + a)));
                const auto [est, err] = estimate_intensity(draws, TensorIndex(K, q));
                rec.values[a] = est;
                rec.std_errors[a] = err;
            }
        }
        records[i] = std::move(rec);
    });

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.inputs.push_back(args.state_file);
    for (const auto& path : args.direction_files) manifest.inputs.push_back(path);
    manifest.output = args.out;
    manifest.seed = args.seed;
    manifest.shots = args.noiseless ? 0 : args.shots;
    manifest.k_x2 = k_x2;
    manifest.mode = args.noiseless ? "noiseless" : "shots";
    atomic_write_text(args.out, measurements_to_json(records, &manifest));

    std::printf("simulated %zu records (%s) -> %s\n", records.size(),
                args.noiseless ? "noiseless" : "shot-limited", args.out.c_str());
    return 0;
}

int cmd_reconstruct(const ReconstructArgs& args) {
    if (args.mode != "exact" && args.mode != "lsq")
        throw std::invalid_argument("reconstruct: --mode must be exact or lsq");

    const auto records = measurements_from_json(read_text_file(args.measurements_file));
    if (records.empty()) throw std::invalid_argument("reconstruct: no measurement records");

    std::vector<int> k_order;
    std::map<int, std::vector<MeasurementRecord>> by_k;
    for (const auto& rec : records) {
        if (!by_k.count(rec.K.twice)) k_order.push_back(rec.K.twice);
        by_k[rec.K.twice].push_back(rec);
    }

    ReconstructionOptions opts;
    opts.mode = (args.mode == "exact") ? ReconstructionOptions::Mode::Exact
                                       : ReconstructionOptions::Mode::LeastSquares;
    opts.lambda = args.lambda;
    opts.psd_project = args.psd_project;

    std::vector<ReconstructionResult> results;
    for (int twoK : k_order) {
        const HalfInt K = HalfInt::from_twice(twoK);
        auto [g, diag] = reconstruct_correlations(by_k.at(twoK), K, opts);
        std::printf("K=%s (%s): residual %.6g", K.str().c_str(), diag.mode.c_str(),
                    diag.residual);
        if (diag.mode == "lsq") {
            std::printf(" (chi^2, %zu rows)", by_k.at(twoK).size() * K.multiplicity());
            std::printf("; per-entry std errors available");
        }
        for (const auto& [L, cond] : diag.cond_P)
            std::printf(" cond(P_%d)=%.4g", L, cond);
        std::printf("\n");
        for (const auto& warning : diag.warnings)
            std::printf("  warning: %s\n", warning.c_str());
        results.push_back({std::move(g), std::move(diag)});
    }

    RunManifest manifest;
    manifest.command = "reconstruct";
    manifest.inputs.push_back(args.measurements_file);
    manifest.output = args.out;
    manifest.k_x2 = k_order;
    manifest.mode = args.mode;
    manifest.lambda = args.lambda;
    manifest.psd_project = args.psd_project;
    atomic_write_text(args.out, results_to_json(results, &manifest));
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
}

int cmd_verify(const VerifyArgs& args) {
    const TwoModeState state = state_from_json(read_text_file(args.state_file));
    const auto results = results_from_json(read_text_file(args.reconstruction_file));
    if (results.empty()) throw std::invalid_argument("verify: reconstruction file has no results");

    std::vector<const ReconstructionResult*> selected;
    if (args.k_filter.empty()) {
        for (const auto& res : results) selected.push_back(&res);
    } else {
        for (double k : args.k_filter) {
            const int twoK = HalfInt::from_value(k).twice;
            const auto it =
                std::find_if(results.begin(), results.end(),
                             [&](const auto& r) { return r.diag.K.twice == twoK; });
            if (it == results.end())
                throw std::invalid_argument("verify: K = " + HalfInt::from_twice(twoK).str() +
                                            " not present in reconstruction file (K mismatch)");
            selected.push_back(&*it);
        }
    }

    std::ostringstream csv;
    csv << "# command: verify\n";
    csv << "# state: " << args.state_file << "\n";
    csv << "# reconstruction: " << args.reconstruction_file << "\n";
    csv << "# tool_version: " << kToolVersion << "\n";
    csv << "# convention_fingerprint: " << convention_fingerprint() << "\n";
    csv << "K_x2,L,multipole_norm_reconstructed,multipole_norm_truth,multipole_norm_error,"
           "max_entry_error\n";

    bool all_ok = true;
    double global_max_err = 0.0;
    for (const auto* res : selected) {
        const HalfInt K = res->diag.K;
        const CorrelationMatrix truth = correlation_matrix(state, K);
        if (truth.g.rows() != res->G.g.rows())
            throw std::invalid_argument("verify: K mismatch between state and reconstruction");
        const double max_err = (res->G.g - truth.g).cwiseAbs().maxCoeff();
        global_max_err = std::max(global_max_err, max_err);
        for (int L = 0; L <= K.twice; ++L) {
            const MultipoleVector got = multipole_of(res->G, L);
            const MultipoleVector want = multipole_of(truth, L);
            double diff = 0.0;
            for (int m = -L; m <= L; ++m) diff = std::max(diff, std::abs(got.at_m(m) - want.at_m(m)));
            char line[256];
            std::snprintf(line, sizeof(line), "%d,%d,%.12e,%.12e,%.12e,%.12e\n", K.twice, L,
                          got.norm(), want.norm(), diff, max_err);
            csv << line;
        }
        std::printf("K=%s: max |Delta G| = %.6e (%s)\n", K.str().c_str(), max_err,
                    max_err <= args.tol ? "ok" : "FAIL");
        if (max_err > args.tol) all_ok = false;
    }

    if (!args.out.empty()) atomic_write_text(args.out, csv.str());
    std::printf("verify: max |Delta G| over all orders = %.6e, tolerance %.3g -> %s\n",
                global_max_err, args.tol, all_ok ? "PASS" : "FAIL");
    if (!all_ok)
        throw VerificationFailure("verification failed: max error " +
                                  std::to_string(global_max_err) + " exceeds tolerance");
    return 0;
}

} // namespace polariscope::cli
