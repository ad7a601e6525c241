#include "semsel/synthgen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semsel/errors.hpp"
#include "semsel/ga.hpp"
#include "semsel/parallel.hpp"
#include "semsel/rng.hpp"

namespace semsel {

namespace {

// Hardness knobs for the planted construction. kSignalStrength sets the
// ratio of class-center spread to instance noise at noise_scale 1;
// kNoiseAmplitude sets the root-mean-square size of the irrelevant
// prototype entries relative to the relevant grid (whose magnitudes span
// [1,2]). Large irrelevant entries dominate the cosine score, so keeping
// them degrades the full-space model measurably while the planted mask
// stays near-perfect.
constexpr double kSignalStrength = 0.8;
constexpr double kNoiseAmplitude = 2.0;

std::string class_name(const char* prefix, int i) {
    std::string n = std::to_string(i);
    if (n.size() < 2) n.insert(0, "0");
    return std::string(prefix) + n;
}

// One relevant column: a balanced random +-1 sign per class (gives linear
// margins) times a permuted even grid over [1,2] (gives every class its own
// split point, so trees can separate too).
Vector relevant_column(int n_classes, Rng& rng) {
    std::vector<int> grid(static_cast<std::size_t>(n_classes));
    std::iota(grid.begin(), grid.end(), 0);
    rng.shuffle(grid);
    std::vector<int> sign_slot = grid;
    rng.shuffle(sign_slot);

    Vector col(n_classes);
    for (int c = 0; c < n_classes; ++c) {
        const double magnitude =
            n_classes == 1
                ? 1.5
                : 1.0 + static_cast<double>(grid[static_cast<std::size_t>(c)]) /
                            static_cast<double>(n_classes - 1);
        const double sign = sign_slot[static_cast<std::size_t>(c)] < (n_classes + 1) / 2 ? 1.0 : -1.0;
        col(c) = sign * magnitude;
    }
    return col;
}

}  // namespace

void SynthSpec::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1)
            throw ConfigError("InvalidSpec",
                              std::string(name) + " must be >= 1, got " + std::to_string(v));
    };
    positive(n_seen, "n_seen");
    positive(n_unseen, "n_unseen");
    positive(n_relevant, "n_relevant");
    positive(visual_dim, "visual_dim");
    positive(instances_per_class, "instances_per_class");
    if (n_noise < 0)
        throw ConfigError("InvalidSpec", "n_noise must be >= 0, got " + std::to_string(n_noise));
    if (noise_scale < 0.0)
        throw ConfigError("InvalidSpec",
                          "noise_scale must be >= 0, got " + std::to_string(noise_scale));
}

SynthSpec synth_spec_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidSpec", std::string("spec is not valid JSON: ") + e.what());
    }
    SynthSpec spec;
    try {
        spec.n_seen = doc.value("n_seen", spec.n_seen);
        spec.n_unseen = doc.value("n_unseen", spec.n_unseen);
        spec.n_relevant = doc.value("n_relevant", spec.n_relevant);
        spec.n_noise = doc.value("n_noise", spec.n_noise);
        spec.visual_dim = doc.value("visual_dim", spec.visual_dim);
        spec.instances_per_class = doc.value("instances_per_class", spec.instances_per_class);
        spec.noise_scale = doc.value("noise_scale", spec.noise_scale);
        spec.seed = doc.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidSpec", std::string("bad spec field: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::ordered_json doc;
    doc["n_seen"] = spec.n_seen;
    doc["n_unseen"] = spec.n_unseen;
    doc["n_relevant"] = spec.n_relevant;
    doc["n_noise"] = spec.n_noise;
    doc["visual_dim"] = spec.visual_dim;
    doc["instances_per_class"] = spec.instances_per_class;
    doc["noise_scale"] = spec.noise_scale;
    doc["seed"] = spec.seed;
    return doc.dump(2) + "\n";
}

namespace {

SynthResult generate_once(const SynthSpec& spec) {
    const int n_classes = spec.n_seen + spec.n_unseen;
    const int n_attr = spec.n_relevant + spec.n_noise;

    // Independent streams so tweaking one ingredient leaves the rest stable.
    Rng col_rng(derive_seed(spec.seed, "columns"));
    Rng noise_rng(derive_seed(spec.seed, "noise-columns"));
    Rng perm_rng(derive_seed(spec.seed, "column-placement"));
    Rng map_rng(derive_seed(spec.seed, "visual-map"));
    Rng train_rng(derive_seed(spec.seed, "train-noise"));
    Rng test_rng(derive_seed(spec.seed, "test-noise"));

    Matrix relevant(n_classes, spec.n_relevant);
    for (int j = 0; j < spec.n_relevant; ++j) relevant.col(j) = relevant_column(n_classes, col_rng);

    // Noise prototypes draw i.i.d. from the symmetric ternary law
    // {-a w.p. 7/20, 0 w.p. 6/20, +a w.p. 7/20} with a scaled so each entry
    // carries kNoiseAmplitude^2 of energy on average — heavy enough to swamp
    // the cosine score when these columns are kept. Class-independent and
    // few-valued, so no split point or margin separates classes
    // systematically; the standardized entries peak at ~1.2 (below the ~1.31
    // of a relevant grid column) with mean ~0.84 (below the ~0.98 of a grid
    // column), so coefficient- and impurity-based rankers both retain a real
    // margin to detect relevance.
    const double noise_value = kNoiseAmplitude / std::sqrt(0.7);
    Matrix noise(n_classes, spec.n_noise);
    for (int j = 0; j < spec.n_noise; ++j)
        for (int c = 0; c < n_classes; ++c) {
            const std::uint64_t u = noise_rng.uniform_index(20);
            noise(c, j) = u < 7 ? noise_value : (u < 14 ? -noise_value : 0.0);
        }

    std::vector<int> placement(static_cast<std::size_t>(n_attr));
    std::iota(placement.begin(), placement.end(), 0);
    perm_rng.shuffle(placement);

    SynthResult out;
    out.ground_truth = AttributeMask::zeros(static_cast<std::size_t>(n_attr));
    SemanticSpace& semantics = out.bundle.semantics;
    semantics.matrix.resize(n_classes, n_attr);
    semantics.attribute_names.reserve(static_cast<std::size_t>(n_attr));
    for (int j = 0; j < n_attr; ++j)
        semantics.attribute_names.push_back("attr_" + std::to_string(j));
    for (int j = 0; j < n_attr; ++j) {
        const int target = placement[static_cast<std::size_t>(j)];
        if (j < spec.n_relevant) {
            semantics.matrix.col(target) = relevant.col(j);
            out.ground_truth.bits[static_cast<std::size_t>(target)] = 1;
        } else {
            semantics.matrix.col(target) = noise.col(j - spec.n_relevant);
        }
    }

    for (int c = 0; c < n_classes; ++c) {
        const bool seen = c < spec.n_seen;
        const std::string name = class_name(seen ? "seen_" : "unseen_", seen ? c : c - spec.n_seen);
        semantics.class_ids.push_back(name);
        (seen ? out.bundle.split.seen : out.bundle.split.unseen).push_back(name);
    }

    // Entry scale 1/sqrt(n_relevant) keeps the class-center spread roughly
    // independent of how many relevant attributes feed the map, so
    // noise_scale has the same meaning across specs.
    const double map_scale = kSignalStrength / std::sqrt(static_cast<double>(spec.n_relevant));
    Matrix visual_map(spec.visual_dim, spec.n_relevant);
    for (int d = 0; d < spec.visual_dim; ++d)
        for (int j = 0; j < spec.n_relevant; ++j)
            visual_map(d, j) = map_scale * map_rng.normal();

    auto fill = [&](VisualSet& set, int first_class, int count, Rng& rng) {
        set.features.resize(count * spec.instances_per_class, spec.visual_dim);
        set.labels.reserve(static_cast<std::size_t>(count * spec.instances_per_class));
        int row = 0;
        for (int c = first_class; c < first_class + count; ++c) {
            const Vector center = visual_map * relevant.row(c).transpose();
            for (int i = 0; i < spec.instances_per_class; ++i, ++row) {
                for (int d = 0; d < spec.visual_dim; ++d)
                    set.features(row, d) = center(d) + spec.noise_scale * rng.normal();
                set.labels.push_back(semantics.class_ids[static_cast<std::size_t>(c)]);
            }
        }
    };
    fill(out.bundle.train, 0, spec.n_seen, train_rng);
    fill(out.bundle.test, spec.n_seen, spec.n_unseen, test_rng);

    out.bundle.validate();
    return out;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
    spec.validate();

    // Nothing to prune (ground truth is all-ones) or too few seen classes to
    // fold: the planted guarantee is vacuous, generate directly.
    if (spec.n_noise == 0 || spec.n_seen < 2) {
        SynthResult out = generate_once(spec);
        out.seed_used = spec.seed;
        return out;
    }

    constexpr int kMaxDraws = 64;
    constexpr double kGuaranteeLambda = 500000.0;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
        SynthSpec attempt = spec;
        if (draw > 0) attempt.seed = derive_seed(spec.seed, "regenerate", draw);
        SynthResult out = generate_once(attempt);

        const FoldPlan plan =
            build_fold_plan(out.bundle.split.seen, std::min(5, spec.n_seen));
        const FitnessContext fitness(out.bundle, plan, kGuaranteeLambda);
        const AttributeMask ones = AttributeMask::ones(out.ground_truth.bits.size());
        const double gt_fitness = fitness.raw_fitness(out.ground_truth);
        const double ones_fitness = fitness.raw_fitness(ones);
        // Strict improvement is the goal; a tie at perfect fold accuracy means
        // the space is too easy for noise to hurt, and no redraw can separate
        // the two masks, so such specs are accepted as-is.
        if (gt_fitness > ones_fitness || (gt_fitness == 1.0 && ones_fitness == 1.0)) {
            out.seed_used = attempt.seed;
            if (draw > 0)
                warn("planted-signal check rejected seed " + std::to_string(spec.seed) +
                     "; regenerated with seed " + std::to_string(attempt.seed));
            return out;
        }
    }
    throw NumericError("DegenerateConstruction",
                       "could not satisfy the planted-signal guarantee in " +
                           std::to_string(kMaxDraws) + " draws from seed " +
                           std::to_string(spec.seed));
}

bool oracle_improves(const AttributeMask& incumbent, double incumbent_fitness,
                     const AttributeMask& candidate, double candidate_fitness) {
    if (candidate_fitness != incumbent_fitness) return candidate_fitness > incumbent_fitness;
    const std::size_t cand_count = candidate.popcount();
    const std::size_t inc_count = incumbent.popcount();
    if (cand_count != inc_count) return cand_count < inc_count;
    return candidate.indices() < incumbent.indices();
}

OracleResult exhaustive_best_mask(const ZslBundle& bundle, const FoldPlan& plan, double lambda,
                                  int max_n, int threads) {
    const int n = bundle.semantics.num_attributes();
    if (max_n > 16)
        throw ConfigError("TooManyAttributes", "max_n capped at 16, got " + std::to_string(max_n));
    if (n > max_n)
        throw ConfigError("TooManyAttributes", "bundle has " + std::to_string(n) +
                                                   " attributes, oracle limit is " +
                                                   std::to_string(max_n));

    const FitnessContext context(bundle, plan, lambda);
    const std::uint64_t total = (std::uint64_t{1} << n) - 1;

    auto mask_of = [n](std::uint64_t code) {
        AttributeMask m = AttributeMask::zeros(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            if (code & (std::uint64_t{1} << j)) m.bits[static_cast<std::size_t>(j)] = 1;
        return m;
    };

    // Deterministic max-reduce: per-chunk winners, merged in chunk order.
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(64, total));
    std::vector<OracleResult> winners(chunks);
    std::vector<bool> filled(chunks, false);
    parallel_for(chunks, threads, [&](std::size_t chunk) {
        const std::uint64_t begin = 1 + total * chunk / chunks;
        const std::uint64_t end = 1 + total * (chunk + 1) / chunks;
        OracleResult best;
        bool any = false;
        for (std::uint64_t code = begin; code < end; ++code) {
            AttributeMask m = mask_of(code);
            const double f = context.raw_fitness(m);
            if (!any || oracle_improves(best.mask, best.fitness, m, f)) {
                best = OracleResult{std::move(m), f};
                any = true;
            }
        }
        winners[chunk] = std::move(best);
        filled[chunk] = any;
    });

    OracleResult best;
    bool any = false;
    for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
        if (!filled[chunk]) continue;
        if (!any || oracle_improves(best.mask, best.fitness, winners[chunk].mask,
                                    winners[chunk].fitness)) {
            best = winners[chunk];
            any = true;
        }
    }
    if (!any) throw DataError("EmptyMask", "no non-empty mask to enumerate");
    return best;
}

}  // namespace semsel
