// Training-run oracles: short end-to-end fits on synthetic data that check
// the learned behavior, not just the arithmetic. Sizes are kept small enough
// for CI but large enough that the trends are stable across the fixed seeds.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "relseq/datagen.hpp"
#include "relseq/dataset.hpp"
#include "relseq/eval.hpp"
#include "relseq/training.hpp"
#include "relseq/whitening.hpp"

using namespace relseq;

namespace {

// Periodic 1-d signal of length dim: low-frequency sinusoid mixture.
Matrix make_signal(Rng& rng, std::size_t dim) {
    Matrix s(dim, 1);
    for (int w = 0; w < 3; ++w) {
        const double k = 1.0 + static_cast<double>(rng.next_below(3));
        const double amp = rng.uniform(0.5, 1.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (std::size_t i = 0; i < dim; ++i)
            s(i, 0) += amp * std::sin(2.0 * M_PI * k * static_cast<double>(i) /
                                          static_cast<double>(dim) +
                                      phase);
    }
    const double mu = mean(s);
    for (std::size_t i = 0; i < dim; ++i) s(i, 0) -= mu;
    const double sd = std::sqrt(sum_squares(s) / static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) s(i, 0) /= sd;
    return s;
}

Matrix roll_column(const Matrix& col, std::size_t by) {
    Matrix out(col.rows(), 1);
    for (std::size_t i = 0; i < col.rows(); ++i) out((i + by) % col.rows(), 0) = col(i, 0);
    return out;
}

double column_variance(const Matrix& m) {
    const double mu = mean(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double d = m.data()[i] - mu;
        s += d * d;
    }
    return s / static_cast<double>(m.size());
}

double cosine(const Matrix& a, const Matrix& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    return num / std::sqrt(na * nb);
}

// GAE predictively trained on 1-pixel circular shifts of 1-d signals.
struct ShiftModel {
    GaeParams params;
    Sequence train_frames;
};

ShiftModel train_1d_shift_gae() {
    const std::size_t dim = 8, n = 400;
    Rng rng(314);
    Sequence frames{Matrix(dim, n), Matrix(dim, n), Matrix(dim, n)};
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix s = make_signal(rng, dim);
        frames[0].set_col(i, s);
        frames[1].set_col(i, roll_column(s, 1));
        frames[2].set_col(i, roll_column(s, 2));
    }
    Rng init_rng(1);
    GaeParams init = init_gae(init_rng, dim, 16, 8, 0.05);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.epochs = 300;
    cfg.batch_size = 50;
    cfg.seed = 2;
    auto [params, report] = predictive_finetune(init, frames, cfg);
    return {std::move(params), std::move(frames)};
}

} // namespace

TEST_CASE("gae learns 1-pixel circular shifts of 1-d signals") {
    const ShiftModel m = train_1d_shift_gae();

    // Held-out signals.
    Rng rng(99);
    const std::size_t dim = 8, n_test = 100;
    double pred_mse = 0.0, var_sum = 0.0;
    double rollout_mse_sum = 0.0;
    std::size_t rollout_terms = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
        const Matrix x1 = make_signal(rng, dim);
        const Matrix x2 = roll_column(x1, 1);
        const Matrix x3 = roll_column(x1, 2);
        const Matrix xhat = predict_step(m.params, x1, x2);
        pred_mse += sum_squares(sub(xhat, x3)) / static_cast<double>(dim);
        var_sum += column_variance(x3);

        // 5-step rollout against the true continued shift.
        const Sequence pred = rollout(m.params, {x1, x2}, 5);
        for (std::size_t s = 0; s < 5; ++s) {
            const Matrix truth = roll_column(x1, 2 + s);
            rollout_mse_sum += sum_squares(sub(pred[s], truth)) / static_cast<double>(dim);
            ++rollout_terms;
        }
    }
    const double avg_var = var_sum / static_cast<double>(n_test);
    INFO("1-step mse " << pred_mse / n_test << " vs var " << avg_var);
    REQUIRE(pred_mse / static_cast<double>(n_test) < 0.2 * avg_var);
    INFO("rollout mse " << rollout_mse_sum / rollout_terms);
    REQUIRE(rollout_mse_sum / static_cast<double>(rollout_terms) < 0.2 * avg_var);
}

TEST_CASE("reconstructive pretraining halves its loss at desk scale") {
    // Constant shifts of 13x13 patches, whitened, 64 factors / 64 mappings.
    const SequenceData data = gen_shift_sequences(Rng(7), 3000, 2, 13, 3.0, 0.0);
    const WhiteningTransform wt = fit_whitening(data.frames[0], 0.95, 1e-8);
    const Sequence frames = whiten_dataset(data, wt).frames;

    Rng init_rng(3);
    GaeParams init = init_gae(init_rng, wt.d_kept(), 64, 64, 0.01);
    TrainConfig cfg;
    cfg.learning_rate = 0.001;
    cfg.momentum = 0.9;
    cfg.epochs = 50;
    cfg.batch_size = 100;
    cfg.seed = 4;
    const auto [x1, x2] = adjacent_pairs(frames);
    const auto [params, report] = pretrain_gae(init, x1, x2, cfg);
    INFO("epoch0 " << report.epochs.front().loss << " final " << report.epochs.back().loss);
    REQUIRE(report.epochs.back().loss < 0.5 * report.epochs.front().loss);
}

TEST_CASE("predictive constshift training leaves mappings content-invariant") {
    // Train on constant 2-d shifts, then compare mapping cosines: same shift
    // across different contents should be closer than different shifts on
    // the same content, on average.
    const std::size_t size = 8, n = 2000;
    const SequenceData data = gen_shift_sequences(Rng(11), n, 3, size, 2.0, 0.0);
    Rng init_rng(5);
    GaeParams init = init_gae(init_rng, size * size, 48, 32, 0.05);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.epochs = 60;
    cfg.batch_size = 100;
    cfg.seed = 6;
    const auto [params, report] = predictive_finetune(init, data.frames, cfg);

    Rng rng(12);
    double margin_sum = 0.0;
    const std::size_t trials = 1000;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng pa = rng.split(2 * t);
        Rng pb = rng.split(2 * t + 1);
        const Matrix content_a = make_patch(pa, size);
        const Matrix content_b = make_patch(pb, size);
        const double sx = rng.uniform(-2.0, 2.0), sy = rng.uniform(-2.0, 2.0);
        double ox = rng.uniform(-2.0, 2.0), oy = rng.uniform(-2.0, 2.0);
        while (std::hypot(ox - sx, oy - sy) < 1.0) {
            ox = rng.uniform(-2.0, 2.0);
            oy = rng.uniform(-2.0, 2.0);
        }
        const Matrix m_as = infer_mappings(params, flatten(content_a),
                                           flatten(shift_patch(content_a, sx, sy)));
        const Matrix m_bs = infer_mappings(params, flatten(content_b),
                                           flatten(shift_patch(content_b, sx, sy)));
        const Matrix m_ao = infer_mappings(params, flatten(content_a),
                                           flatten(shift_patch(content_a, ox, oy)));
        margin_sum += cosine(m_as, m_bs) - cosine(m_as, m_ao);
    }
    const double avg_margin = margin_sum / static_cast<double>(trials);
    INFO("mean cosine margin " << avg_margin);
    REQUIRE(avg_margin > 0.0);
}

TEST_CASE("trained layer-1 mappings agree for a transformation applied twice") {
    // Constant shifts: m over (x0,x1) and over (x1,x2) should converge.
    const std::size_t size = 8, n = 1500;
    const SequenceData data = gen_shift_sequences(Rng(21), n, 3, size, 2.0, 0.0);
    Rng init_rng(8);
    GaeParams init = init_gae(init_rng, size * size, 48, 32, 0.05);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.epochs = 120;
    cfg.batch_size = 100;
    cfg.seed = 9;
    const auto [trained, report] = predictive_finetune(init, data.frames, cfg);

    // Assemble a two-layer model; the first-order mappings only use layer 1.
    HgaeParams model{trained, init_gae(init_rng, 32, 8, 8, 0.05)};
    const SequenceData test = gen_shift_sequences(Rng(22), 200, 3, size, 2.0, 0.0);
    const auto h = infer_hierarchy(model, test.frames[0], test.frames[1], test.frames[2]);
    double cos_sum = 0.0;
    for (std::size_t i = 0; i < test.n; ++i)
        cos_sum += cosine(h.m1_a.col_copy(i), h.m1_b.col_copy(i));
    INFO("mean cosine " << cos_sum / test.n);
    REQUIRE(cos_sum / static_cast<double>(test.n) > 0.95);
}

TEST_CASE("layer-2 pretraining reduces its reconstruction loss substantially") {
    // Accelerated rotations so the mapping pairs carry real structure;
    // whitened like the real pipeline.
    const SequenceData raw =
        gen_rotation_sequences(Rng(31), 1500, 4, 9, M_PI / 12.0, M_PI / 12.0);
    const WhiteningTransform wt = fit_whitening(raw.frames[0], 0.95, 1e-8);
    const SequenceData data = whiten_dataset(raw, wt);
    Rng init_rng(10);
    const GaeParams l1_init = init_gae(init_rng, wt.d_kept(), 32, 24, 0.05);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.epochs = 40;
    cfg.batch_size = 100;
    cfg.seed = 11;
    const auto [px1, px2] = adjacent_pairs(data.frames);
    const auto [l1, l1_report] = pretrain_gae(l1_init, px1, px2, cfg);

    // Mapping-space inputs sit near 0.5, so the layer needs a larger init
    // than frame-space layers for the multiplicative gradients to move.
    const GaeParams l2_init = init_gae(init_rng, 24, 24, 16, 0.1);
    TrainConfig cfg2 = cfg;
    cfg2.epochs = 150;
    cfg2.seed = 12;
    const auto [l2, report] = pretrain_hgae_layer2(l1, l2_init, data.frames, cfg2);
    INFO("l2 epoch0 " << report.epochs.front().loss << " final " << report.epochs.back().loss);
    REQUIRE(report.epochs.back().loss <= 0.7 * report.epochs.front().loss);
}

TEST_CASE("horizon curriculum recovers after the switch") {
    // Switch to k=2 early; the 2-step loss must fall back below the loss
    // level just before the switch within the phase.
    const std::size_t dim = 8, n = 400;
    Rng rng(41);
    Sequence frames{Matrix(dim, n), Matrix(dim, n), Matrix(dim, n), Matrix(dim, n)};
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix s = make_signal(rng, dim);
        for (std::size_t t = 0; t < 4; ++t) frames[t].set_col(i, roll_column(s, t));
    }
    Rng init_rng(13);
    GaeParams init = init_gae(init_rng, dim, 16, 8, 0.05);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.epochs = 260;
    cfg.batch_size = 50;
    cfg.seed = 14;
    cfg.horizon_schedule = {{0, 1}, {30, 2}};
    const auto [params, report] = predictive_finetune(init, frames, cfg);

    const double pre_switch = report.epochs[29].loss;
    const double at_switch = report.epochs[30].loss;
    const double final_loss = report.epochs.back().loss;
    INFO("pre " << pre_switch << " at-switch " << at_switch << " final " << final_loss);
    REQUIRE(report.epochs[29].k == 1);
    REQUIRE(report.epochs[30].k == 2);
    REQUIRE(at_switch > pre_switch);  // horizon bump
    REQUIRE(final_loss < pre_switch); // recovered within the phase
}
