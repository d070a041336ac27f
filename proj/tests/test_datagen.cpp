#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

#include "relseq/datagen.hpp"

using namespace relseq;

namespace {

double frame_variance(const Matrix& col) {
    const double mu = mean(col);
    double s = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
        const double d = col.data()[i] - mu;
        s += d * d;
    }
    return s / static_cast<double>(col.size());
}

double mse(const Matrix& a, const Matrix& b) {
    return sum_squares(sub(a, b)) / static_cast<double>(a.size());
}

Matrix roll(const Matrix& grid, long rshift, long cshift) {
    const long n = static_cast<long>(grid.rows());
    Matrix out(grid.rows(), grid.cols());
    for (long r = 0; r < n; ++r)
        for (long c = 0; c < n; ++c) {
            const long sr = ((r - rshift) % n + n) % n;
            const long sc = ((c - cshift) % n + n) % n;
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                grid(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        }
    return out;
}

double correlation(const Matrix& a, const Matrix& b) {
    const double ma = mean(a), mb = mean(b);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.data()[i] - ma;
        const double db = b.data()[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    return num / std::sqrt(va * vb);
}

} // namespace

TEST_CASE("make_patch is deterministic, normalized, decorrelated across seeds") {
    Rng a(7), b(7);
    const Matrix pa = make_patch(a, 13);
    const Matrix pb = make_patch(b, 13);
    REQUIRE(pa == pb);

    REQUIRE(std::abs(mean(pa)) < 1e-10);
    REQUIRE(std::abs(sum_squares(pa) / static_cast<double>(pa.size()) - 1.0) < 1e-10);

    Rng seeds(100);
    double corr_sum = 0.0;
    for (int i = 0; i < 100; ++i) {
        Rng r1(seeds.next_u64()), r2(seeds.next_u64());
        corr_sum += std::abs(correlation(make_patch(r1, 13), make_patch(r2, 13)));
    }
    REQUIRE(corr_sum / 100.0 < 0.9);

    Rng tiny(1);
    REQUIRE_THROWS_AS(make_patch(tiny, 3), std::invalid_argument);
}

TEST_CASE("integer shifts are exact circular rolls") {
    Rng rng(3);
    const Matrix patch = make_patch(rng, 9);
    const Matrix shifted = shift_patch(patch, 2.0, -3.0);
    REQUIRE(shifted == roll(patch, -3, 2));

    // Through the generator: v=(1,0) integer velocity, frame t rolled by t.
    const SequenceData data = gen_shift_sequences(Rng(11), 3, 4, 8, 0.0, 0.0);
    for (std::size_t t = 0; t < 4; ++t) REQUIRE(data.frames[t] == data.frames[0]);
}

TEST_CASE("half-pixel steps accumulate to the exact integer roll") {
    Rng rng(4);
    const Matrix patch = make_patch(rng, 11);
    // Frames come from the base patch at the cumulative displacement, so two
    // half-pixel steps land exactly on the one-pixel roll.
    const Matrix two_halves = shift_patch(patch, kinematic_position(0.5, 0.0, 2), 0.0);
    const Matrix one = shift_patch(patch, 1.0, 0.0);
    REQUIRE(max_abs_diff(two_halves, one) < 1e-6);

    // Iterating the interpolation instead (shift the already-shifted frame)
    // smears high frequencies; tolerance frozen from measuring 50 patches.
    const Matrix composed = shift_patch(shift_patch(patch, 0.5, 0.0), 0.5, 0.0);
    REQUIRE(max_abs_diff(composed, one) < 0.9);
    REQUIRE(mse(composed, one) < 0.12 * frame_variance(one));
}

TEST_CASE("rotation identities") {
    Rng rng(5);
    const Matrix patch = make_patch(rng, 13);
    REQUIRE(rotate_patch(patch, 0.0) == patch);

    const double var = frame_variance(patch);
    // Cumulative angle reaching a full turn reproduces the base frame.
    REQUIRE(mse(rotate_patch(patch, 2.0 * M_PI), patch) < 0.05 * var);
    // Cumulative angle returning to zero is the identity code path: exact.
    REQUIRE(kinematic_position(0.7, -1.4, 2) == 0.0);
    REQUIRE(rotate_patch(patch, kinematic_position(0.7, -1.4, 2)) == patch);

    // Double resampling (rotate the rotated frame back) only recovers the
    // central disc; corner samples wrapped. Frozen from measuring 50 patches.
    const Matrix there_and_back = rotate_patch(rotate_patch(patch, 0.7), -0.7);
    const double center = 6.0;
    double mse_disc = 0.0, var_disc = 0.0;
    std::size_t count = 0;
    const double mu = mean(patch);
    for (std::size_t r = 0; r < 13; ++r)
        for (std::size_t c = 0; c < 13; ++c) {
            const double dy = static_cast<double>(r) - center;
            const double dx = static_cast<double>(c) - center;
            if (dx * dx + dy * dy > 3.5 * 3.5) continue;
            const double d = there_and_back(r, c) - patch(r, c);
            mse_disc += d * d;
            var_disc += (patch(r, c) - mu) * (patch(r, c) - mu);
            ++count;
        }
    REQUIRE(count > 0);
    REQUIRE(mse_disc < 0.10 * var_disc);
}

TEST_CASE("shift label hand cases") {
    REQUIRE(label_shift(1.0, 1.0, {2.0, 5.0}) == 0);
    REQUIRE(label_shift(-1.0, -1.0, {1.0, 5.0}) == 6);
    REQUIRE(label_shift(-1.0, 1.0, {2.0, 5.0}) == 1);
    REQUIRE(label_shift(1.0, -1.0, {0.5, 5.0}) == 7);
    REQUIRE_THROWS_AS(label_shift(9.0, 9.0, {1.0, 5.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(label_shift(1.0, 1.0, {5.0, 5.0}), std::invalid_argument);
}

TEST_CASE("fitted beta makes the eight bins uniform") {
    Rng rng(8);
    const std::size_t n = 100000;
    std::vector<double> xs(n), ys(n), mags(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rng.uniform(-3.0, 3.0);
        ys[i] = rng.uniform(-3.0, 3.0);
        mags[i] = std::hypot(xs[i], ys[i]);
    }
    const ShiftLabelSpec spec{fit_beta(mags), 3.0 * std::sqrt(2.0) * (1.0 + 1e-12)};
    std::size_t counts[8] = {0};
    for (std::size_t i = 0; i < n; ++i)
        counts[static_cast<std::size_t>(label_shift(xs[i], ys[i], spec))]++;

    double chi2 = 0.0;
    const double expected = static_cast<double>(n) / 8.0;
    for (auto c : counts) {
        const double frac = static_cast<double>(c) / static_cast<double>(n);
        REQUIRE(std::abs(frac - 0.125) < 0.01);
        chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) /
                expected;
    }
    REQUIRE(chi2 < 18.48);  // chi-square df=7 critical value at p = 0.01
}

TEST_CASE("angle binning closed form and edges") {
    REQUIRE(label_angle(-M_PI * (1.0 - 1e-9)) == 0);
    REQUIRE(label_angle(M_PI * (1.0 - 1e-9)) == 7);
    REQUIRE(label_angle(M_PI / 2.0) == 6);
    REQUIRE(label_angle(0.0) == 4);
    REQUIRE(label_angle(-1e-12) == 3);
    REQUIRE_THROWS_AS(label_angle(M_PI), std::invalid_argument);
    REQUIRE_THROWS_AS(label_angle(-4.0), std::invalid_argument);
}

TEST_CASE("generators are deterministic under a fixed seed") {
    const SequenceData a = gen_shift_sequences(Rng(21), 6, 3, 8, 3.0, 0.0);
    const SequenceData b = gen_shift_sequences(Rng(21), 6, 3, 8, 3.0, 0.0);
    for (std::size_t t = 0; t < a.T; ++t) REQUIRE(a.frames[t] == b.frames[t]);
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.gen_params == b.gen_params);

    const SequenceData r1 = gen_rotation_sequences(Rng(22), 5, 3, 9, M_PI, 0.0);
    const SequenceData r2 = gen_rotation_sequences(Rng(22), 5, 3, 9, M_PI, 0.0);
    for (std::size_t t = 0; t < r1.T; ++t) REQUIRE(r1.frames[t] == r2.frames[t]);

    const SequenceData bb1 = gen_bouncing_balls(Rng(23), 3, 4, 16);
    const SequenceData bb2 = gen_bouncing_balls(Rng(23), 3, 4, 16);
    for (std::size_t t = 0; t < bb1.T; ++t) REQUIRE(bb1.frames[t] == bb2.frames[t]);
}

TEST_CASE("parallel and serial generation agree bit-exactly") {
    setenv("RELSEQ_THREADS", "1", 1);
    const SequenceData serial = gen_shift_sequences(Rng(33), 12, 3, 8, 3.0, 1.0);
    setenv("RELSEQ_THREADS", "4", 1);
    const SequenceData parallel = gen_shift_sequences(Rng(33), 12, 3, 8, 3.0, 1.0);
    unsetenv("RELSEQ_THREADS");
    for (std::size_t t = 0; t < serial.T; ++t) REQUIRE(serial.frames[t] == parallel.frames[t]);
    REQUIRE(serial.labels == parallel.labels);
}

TEST_CASE("rotation generator labels angular quantities") {
    // Constant rotations: label is the binned initial angle.
    const SequenceData rot = gen_rotation_sequences(Rng(41), 200, 3, 8, M_PI, 0.0);
    for (std::size_t i = 0; i < rot.n; ++i) {
        REQUIRE(rot.labels[i] >= 0);
        REQUIRE(rot.labels[i] < 8);
        REQUIRE(rot.labels[i] == label_angle(detail::clamp_open_pi(rot.gen_params(i, 0))));
    }
    // Accelerated rotations: label is the binned acceleration, scaled.
    const SequenceData acc = gen_rotation_sequences(Rng(42), 200, 4, 8, M_PI / 12.0, M_PI / 12.0);
    for (std::size_t i = 0; i < acc.n; ++i) {
        const double scaled = acc.gen_params(i, 1) * 12.0;
        REQUIRE(acc.labels[i] == label_angle(detail::clamp_open_pi(scaled)));
    }
}

TEST_CASE("ball reflections flip velocity exactly and conserve energy") {
    BallState s;
    s.radius = 1.0;
    s.box_size = 10.0;
    s.positions = Matrix::from_rows({{1.05, 5.0}});
    s.velocities = Matrix::from_rows({{-0.7, 0.0}});
    advance_substep(s, 0.5);
    REQUIRE(s.velocities(0, 0) == 0.7);
    REQUIRE(s.positions(0, 0) >= s.radius);

    // Two balls on a collision course: energy before == energy after.
    BallState two;
    two.radius = 1.0;
    two.box_size = 20.0;
    two.positions = Matrix::from_rows({{8.0, 10.0}, {10.05, 10.0}});
    two.velocities = Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
    const double e0 = kinetic_energy(two);
    advance_substep(two, 0.1);
    REQUIRE_THAT(kinetic_energy(two), Catch::Matchers::WithinRel(e0, 1e-9));
    // Equal masses swap normal components.
    REQUIRE(two.velocities(0, 0) == -1.0);
    REQUIRE(two.velocities(1, 0) == 1.0);
}

TEST_CASE("long simulation conserves energy and stays in the box") {
    Rng rng(55);
    BallState s = init_balls(rng, 3, 1.2, 10.0, 0.5);
    const double e0 = kinetic_energy(s);
    for (int step = 0; step < 10000; ++step) {
        advance_substep(s, 0.1);
        REQUIRE(inside_box(s));
    }
    REQUIRE_THAT(kinetic_energy(s), Catch::Matchers::WithinRel(e0, 1e-9));
}

TEST_CASE("free ball advances linearly in the rendering") {
    BallState s;
    s.radius = 1.2;
    s.box_size = 10.0;
    s.positions = Matrix::from_rows({{3.0, 5.0}});
    s.velocities = Matrix::from_rows({{0.3, 0.0}});
    const std::size_t res = 32;
    const double px_per_unit = static_cast<double>(res) / s.box_size;

    double prev_centroid = -1.0;
    for (int frame = 0; frame < 4; ++frame) {
        if (frame > 0)
            for (int sub = 0; sub < 10; ++sub) advance_substep(s, 0.1);
        const Matrix img = render_balls(s, res);
        double wsum = 0.0, xsum = 0.0;
        for (std::size_t r = 0; r < res; ++r)
            for (std::size_t c = 0; c < res; ++c) {
                wsum += img(r, c);
                xsum += img(r, c) * (static_cast<double>(c) + 0.5);
            }
        const double centroid = xsum / wsum;
        if (prev_centroid >= 0.0) {
            const double advance = centroid - prev_centroid;
            REQUIRE_THAT(advance, Catch::Matchers::WithinAbs(0.3 * px_per_unit, 0.1));
        }
        prev_centroid = centroid;
    }
}

TEST_CASE("impossible packing is rejected") {
    Rng rng(66);
    REQUIRE_THROWS_AS(init_balls(rng, 99, 1.2, 10.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_bouncing_balls(Rng(1), 1, 2, 8, 99, 1.2, 10.0),
                      std::invalid_argument);
}

TEST_CASE("split_dataset partitions disjointly and deterministically") {
    const SequenceData data = gen_shift_sequences(Rng(77), 4, 3, 8, 3.0, 0.0);
    Rng r1(5), r2(5);
    const DatasetSplit s1 = split_dataset(data, 2, 1, 1, r1);
    const DatasetSplit s2 = split_dataset(data, 2, 1, 1, r2);
    REQUIRE(s1.train.n == 2);
    REQUIRE(s1.valid.n == 1);
    REQUIRE(s1.test.n == 1);
    REQUIRE(s1.train.frames[0] == s2.train.frames[0]);
    REQUIRE(s1.test.frames[0] == s2.test.frames[0]);

    Rng r3(6);
    REQUIRE_THROWS_AS(split_dataset(data, 3, 1, 1, r3), std::invalid_argument);
}

TEST_CASE("split label distributions track the global distribution") {
    const SequenceData data = gen_shift_sequences(Rng(88), 10000, 3, 8, 3.0, 0.0);
    Rng r(9);
    const DatasetSplit split = split_dataset(data, 6000, 2000, 2000, r);
    double global[8] = {0}, train[8] = {0};
    for (auto l : data.labels) global[l] += 1.0 / static_cast<double>(data.n);
    for (auto l : split.train.labels) train[l] += 1.0 / static_cast<double>(split.train.n);
    for (int k = 0; k < 8; ++k) REQUIRE(std::abs(global[k] - train[k]) < 0.02);
}
