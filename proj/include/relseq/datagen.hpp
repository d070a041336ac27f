#pragma once

// Deterministic synthetic sequence generators: procedural texture patches
// under constant or accelerated shift/rotation (with 8-way labels), and a
// bouncing-balls simulator with elastic equal-mass collisions. Every sample
// draws from its own substream of the dataset seed, so generation is
// bit-identical whether it runs serially or across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "relseq/hgae.hpp"
#include "relseq/matrix.hpp"
#include "relseq/parallel.hpp"
#include "relseq/rng.hpp"

namespace relseq {

// A generated dataset: n same-length sequences, time-major frame matrices
// (dim x n), optional labels in [0,8) (-1 when absent) and the generator
// parameters (velocity/acceleration components or angles) per sample.
struct SequenceData {
    std::size_t n = 0;
    std::size_t T = 0;
    std::size_t dim = 0;
    Sequence frames;                // T matrices, each dim x n
    std::vector<std::int64_t> labels;  // n entries, -1 = unlabeled
    Matrix gen_params;              // n x 4

    bool labeled() const noexcept {
        for (auto l : labels)
            if (l >= 0) return true;
        return false;
    }
};

// --- patches -----------------------------------------------------------

// Procedural texture patch: a mixture of 3-6 oriented sinusoids plus weak
// noise, normalized to zero mean and unit variance. Wave vectors are integer
// lattice points, so the patch tiles its own boundary seamlessly and the
// wraparound resampling used by the shift/rotation generators never crosses
// a discontinuity. Frequencies stay well below Nyquist for bilinear fidelity.
inline Matrix make_patch(Rng& rng, std::size_t size) {
    if (size < 4) throw std::invalid_argument("make_patch: size must be >= 4");
    Matrix patch(size, size);
    const std::size_t waves = 3 + static_cast<std::size_t>(rng.next_below(4));
    for (std::size_t w = 0; w < waves; ++w) {
        long p = 0, q = 0;
        while (p == 0 && q == 0) {
            p = static_cast<long>(rng.next_below(5)) - 2;
            q = static_cast<long>(rng.next_below(5)) - 2;
        }
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(0.5, 1.0);
        const double kx = 2.0 * M_PI * static_cast<double>(p) / static_cast<double>(size);
        const double ky = 2.0 * M_PI * static_cast<double>(q) / static_cast<double>(size);
        for (std::size_t r = 0; r < size; ++r)
            for (std::size_t c = 0; c < size; ++c)
                patch(r, c) += amp * std::sin(kx * static_cast<double>(c) +
                                              ky * static_cast<double>(r) + phase);
    }
    for (std::size_t i = 0; i < patch.size(); ++i) patch.data()[i] += 0.05 * rng.next_gaussian();

    const double mu = mean(patch);
    for (std::size_t i = 0; i < patch.size(); ++i) patch.data()[i] -= mu;
    const double sd = std::sqrt(sum_squares(patch) / static_cast<double>(patch.size()));
    if (sd > 0.0)
        for (std::size_t i = 0; i < patch.size(); ++i) patch.data()[i] /= sd;
    return patch;
}

namespace detail {

inline double wrap_index(double x, std::size_t size) {
    const double s = static_cast<double>(size);
    double r = std::fmod(x, s);
    if (r < 0.0) r += s;
    return r;
}

// Bilinear sample with periodic boundary. Integer coordinates reduce to a
// direct (bitwise exact) copy of the wrapped source pixel.
inline double sample_periodic(const Matrix& src, double row, double col) {
    const std::size_t size = src.rows();
    const double rw = wrap_index(row, size);
    const double cw = wrap_index(col, size);
    const std::size_t r0 = static_cast<std::size_t>(rw);
    const std::size_t c0 = static_cast<std::size_t>(cw);
    const double fr = rw - static_cast<double>(r0);
    const double fc = cw - static_cast<double>(c0);
    if (fr == 0.0 && fc == 0.0) return src(r0 % size, c0 % size);
    const std::size_t r1 = (r0 + 1) % size;
    const std::size_t c1 = (c0 + 1) % size;
    return (1.0 - fr) * ((1.0 - fc) * src(r0, c0) + fc * src(r0, c1)) +
           fr * ((1.0 - fc) * src(r1, c0) + fc * src(r1, c1));
}

} // namespace detail

// Patch translated by (dx, dy) pixels with wraparound.
inline Matrix shift_patch(const Matrix& patch, double dx, double dy) {
    const std::size_t size = patch.rows();
    Matrix out(size, size);
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c)
            out(r, c) = detail::sample_periodic(patch, static_cast<double>(r) - dy,
                                                static_cast<double>(c) - dx);
    return out;
}

// Patch rotated about its center by theta; source sampling coordinates wrap.
inline Matrix rotate_patch(const Matrix& patch, double theta) {
    const std::size_t size = patch.rows();
    const double center = (static_cast<double>(size) - 1.0) / 2.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    Matrix out(size, size);
    for (std::size_t r = 0; r < size; ++r) {
        const double v = static_cast<double>(r) - center;
        for (std::size_t c = 0; c < size; ++c) {
            const double u = static_cast<double>(c) - center;
            const double su = ct * u + st * v;
            const double sv = -st * u + ct * v;
            out(r, c) = detail::sample_periodic(patch, center + sv, center + su);
        }
    }
    return out;
}

inline Matrix flatten(const Matrix& grid) {
    Matrix col(grid.size(), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) col(i, 0) = grid.data()[i];
    return col;
}

// --- labels ------------------------------------------------------------

// Quadrant plus magnitude-threshold discretization of a 2-vector into 8 bins.
struct ShiftLabelSpec {
    double beta;   // magnitude threshold
    double alpha;  // maximum magnitude in the data set

    void validate() const {
        if (!(beta > 0.0 && beta < alpha))
            throw std::invalid_argument("ShiftLabelSpec: need 0 < beta < alpha");
    }
};

inline std::int64_t label_shift(double x, double y, const ShiftLabelSpec& spec) {
    spec.validate();
    const double mag = std::hypot(x, y);
    if (mag > spec.alpha * (1.0 + 1e-9))
        throw std::invalid_argument("label_shift: magnitude " + std::to_string(mag) +
                                    " exceeds alpha " + std::to_string(spec.alpha));
    std::int64_t quadrant;
    if (x >= 0.0)
        quadrant = y >= 0.0 ? 0 : 3;
    else
        quadrant = y >= 0.0 ? 1 : 2;
    return mag < spec.beta ? quadrant : quadrant + 4;
}

// Threshold that splits magnitudes evenly: the sample median.
inline double fit_beta(std::vector<double> magnitudes) {
    if (magnitudes.empty()) throw std::invalid_argument("fit_beta: empty input");
    std::sort(magnitudes.begin(), magnitudes.end());
    const std::size_t n = magnitudes.size();
    if (n % 2 == 1) return magnitudes[n / 2];
    return 0.5 * (magnitudes[n / 2 - 1] + magnitudes[n / 2]);
}

// Uniform binning of an angle in (-pi, pi).
inline std::int64_t label_angle(double theta, std::size_t bins = 8) {
    if (!(theta > -M_PI && theta < M_PI))
        throw std::invalid_argument("label_angle: theta must lie in (-pi, pi)");
    const double width = 2.0 * M_PI / static_cast<double>(bins);
    const auto bin = static_cast<std::int64_t>(std::floor((theta + M_PI) / width));
    return std::min<std::int64_t>(bin, static_cast<std::int64_t>(bins) - 1);
}

namespace detail {

// Keeps sampled values inside label_angle's open domain.
inline double clamp_open_pi(double theta) {
    const double lim = M_PI * (1.0 - 1e-12);
    return std::clamp(theta, -lim, lim);
}

} // namespace detail

// --- shift / rotation sequences ----------------------------------------

// Cumulative displacement after t steps with per-step velocity v + a*t.
inline double kinematic_position(double v0, double acc, std::size_t t) {
    const double td = static_cast<double>(t);
    return v0 * td + 0.5 * acc * td * (td - 1.0);
}

// Sequences of a procedural patch under constant (acc_range == 0) or
// accelerated translation. Labels discretize the velocity for constant sets
// and the acceleration for accelerated sets.
inline SequenceData gen_shift_sequences(const Rng& rng, std::size_t n, std::size_t T,
                                        std::size_t size, double vel_range, double acc_range) {
    if (T < 2 || (acc_range > 0.0 && T < 3))
        throw std::invalid_argument("gen_shift_sequences: T too small");
    SequenceData data;
    data.n = n;
    data.T = T;
    data.dim = size * size;
    data.frames.assign(T, Matrix(data.dim, n));
    data.labels.assign(n, -1);
    data.gen_params = Matrix(n, 4);

    parallel_for(n, [&](std::size_t i) {
        Rng sub = rng.split(i);
        const double vx = sub.uniform(-vel_range, vel_range);
        const double vy = sub.uniform(-vel_range, vel_range);
        const double ax = acc_range > 0.0 ? sub.uniform(-acc_range, acc_range) : 0.0;
        const double ay = acc_range > 0.0 ? sub.uniform(-acc_range, acc_range) : 0.0;
        const Matrix patch = make_patch(sub, size);
        for (std::size_t t = 0; t < T; ++t) {
            const Matrix grid = t == 0 ? patch
                                       : shift_patch(patch, kinematic_position(vx, ax, t),
                                                     kinematic_position(vy, ay, t));
            data.frames[t].set_col(i, flatten(grid));
        }
        data.gen_params(i, 0) = vx;
        data.gen_params(i, 1) = vy;
        data.gen_params(i, 2) = ax;
        data.gen_params(i, 3) = ay;
    });

    // beta fitted to the generating distribution makes the 8 bins uniform.
    std::vector<double> mags(n);
    const bool accelerated = acc_range > 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mags[i] = accelerated ? std::hypot(data.gen_params(i, 2), data.gen_params(i, 3))
                              : std::hypot(data.gen_params(i, 0), data.gen_params(i, 1));
    const double beta = n >= 2 ? fit_beta(mags) : 0.0;
    if (beta > 0.0) {
        const double range = accelerated ? acc_range : vel_range;
        const ShiftLabelSpec spec{beta, range * std::sqrt(2.0) * (1.0 + 1e-12)};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t o = accelerated ? 2 : 0;
            data.labels[i] = label_shift(data.gen_params(i, o), data.gen_params(i, o + 1), spec);
        }
    }
    return data;
}

// Sequences under constant or accelerated rotation about the patch center.
// Labels discretize the angle (constant sets) or angular acceleration.
inline SequenceData gen_rotation_sequences(const Rng& rng, std::size_t n, std::size_t T,
                                           std::size_t size, double angle_range,
                                           double acc_range) {
    if (T < 2 || (acc_range > 0.0 && T < 3))
        throw std::invalid_argument("gen_rotation_sequences: T too small");
    SequenceData data;
    data.n = n;
    data.T = T;
    data.dim = size * size;
    data.frames.assign(T, Matrix(data.dim, n));
    data.labels.assign(n, -1);
    data.gen_params = Matrix(n, 4);

    const bool accelerated = acc_range > 0.0;
    parallel_for(n, [&](std::size_t i) {
        Rng sub = rng.split(i);
        const double omega = sub.uniform(-angle_range, angle_range);
        const double acc = accelerated ? sub.uniform(-acc_range, acc_range) : 0.0;
        const Matrix patch = make_patch(sub, size);
        for (std::size_t t = 0; t < T; ++t) {
            const Matrix grid =
                t == 0 ? patch : rotate_patch(patch, kinematic_position(omega, acc, t));
            data.frames[t].set_col(i, flatten(grid));
        }
        data.gen_params(i, 0) = omega;
        data.gen_params(i, 1) = acc;
    });

    const double label_range = accelerated ? acc_range : angle_range;
    if (label_range > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            // Accelerated sets scale the acceleration interval onto (-pi, pi).
            const double raw = data.gen_params(i, accelerated ? 1 : 0) * (M_PI / label_range);
            data.labels[i] = label_angle(detail::clamp_open_pi(raw));
        }
    }
    return data;
}

// --- bouncing balls ----------------------------------------------------

struct BallState {
    Matrix positions;   // n x 2, box units
    Matrix velocities;  // n x 2, box units per frame
    double radius = 1.2;
    double box_size = 10.0;

    std::size_t count() const noexcept { return positions.rows(); }
};

inline double kinetic_energy(const BallState& s) {
    return 0.5 * sum_squares(s.velocities);
}

inline bool inside_box(const BallState& s, double tol = 1e-9) {
    for (std::size_t i = 0; i < s.count(); ++i)
        for (std::size_t c = 0; c < 2; ++c) {
            const double p = s.positions(i, c);
            if (p < s.radius - tol || p > s.box_size - s.radius + tol) return false;
        }
    return true;
}

// Rejection-samples non-overlapping positions; velocity directions uniform
// on the circle with fixed speed (box units per frame).
inline BallState init_balls(Rng& rng, std::size_t n_balls, double radius, double box_size,
                            double speed = 0.5) {
    if (n_balls == 0) throw std::invalid_argument("init_balls: need at least one ball");
    if (2.0 * radius > box_size)
        throw std::invalid_argument("init_balls: ball diameter exceeds box");
    const double area = static_cast<double>(n_balls) * M_PI * radius * radius;
    if (area > 0.5 * box_size * box_size)
        throw std::invalid_argument("init_balls: impossible packing, " + std::to_string(n_balls) +
                                    " balls of radius " + std::to_string(radius) + " in box " +
                                    std::to_string(box_size));

    BallState s;
    s.radius = radius;
    s.box_size = box_size;
    s.positions = Matrix(n_balls, 2);
    s.velocities = Matrix(n_balls, 2);
    const double lo = radius, hi = box_size - radius;
    for (std::size_t i = 0; i < n_balls; ++i) {
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt > 10000)
                throw std::invalid_argument("init_balls: could not place balls without overlap");
            const double x = rng.uniform(lo, hi);
            const double y = rng.uniform(lo, hi);
            bool ok = true;
            for (std::size_t j = 0; j < i; ++j) {
                const double dx = x - s.positions(j, 0);
                const double dy = y - s.positions(j, 1);
                if (dx * dx + dy * dy < 4.0 * radius * radius) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                s.positions(i, 0) = x;
                s.positions(i, 1) = y;
                break;
            }
        }
        const double dir = rng.uniform(0.0, 2.0 * M_PI);
        s.velocities(i, 0) = speed * std::cos(dir);
        s.velocities(i, 1) = speed * std::sin(dir);
    }
    return s;
}

// One physics substep: advance, reflect at walls, resolve pairwise elastic
// collisions (equal masses exchange normal velocity components), re-clamp.
inline void advance_substep(BallState& s, double dt) {
    const std::size_t n = s.count();
    const double lo = s.radius, hi = s.box_size - s.radius;

    const auto reflect_walls = [&](std::size_t i) {
        for (std::size_t c = 0; c < 2; ++c) {
            double& p = s.positions(i, c);
            double& v = s.velocities(i, c);
            if (p < lo) {
                p = lo + (lo - p);
                if (v < 0.0) v = -v;
                if (p > hi) p = hi;  // pathological overshoot
            } else if (p > hi) {
                p = hi - (p - hi);
                if (v > 0.0) v = -v;
                if (p < lo) p = lo;
            }
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        s.positions(i, 0) += s.velocities(i, 0) * dt;
        s.positions(i, 1) += s.velocities(i, 1) * dt;
        reflect_walls(i);
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = s.positions(j, 0) - s.positions(i, 0);
            const double dy = s.positions(j, 1) - s.positions(i, 1);
            const double dist2 = dx * dx + dy * dy;
            const double contact = 2.0 * s.radius;
            if (dist2 >= contact * contact || dist2 == 0.0) continue;
            const double dist = std::sqrt(dist2);
            const double nx = dx / dist, ny = dy / dist;
            const double rel = (s.velocities(i, 0) - s.velocities(j, 0)) * nx +
                               (s.velocities(i, 1) - s.velocities(j, 1)) * ny;
            if (rel > 0.0) {  // approaching
                s.velocities(i, 0) -= rel * nx;
                s.velocities(i, 1) -= rel * ny;
                s.velocities(j, 0) += rel * nx;
                s.velocities(j, 1) += rel * ny;
            }
            // separate to contact distance
            const double push = 0.5 * (contact - dist);
            s.positions(i, 0) -= push * nx;
            s.positions(i, 1) -= push * ny;
            s.positions(j, 0) += push * nx;
            s.positions(j, 1) += push * ny;
            reflect_walls(i);
            reflect_walls(j);
        }
    }
}

// Grayscale render: filled discs, 4x4 supersampling per pixel, values in [0,1].
inline Matrix render_balls(const BallState& s, std::size_t resolution) {
    constexpr std::size_t ss = 4;
    const double px = s.box_size / static_cast<double>(resolution);
    Matrix img(resolution, resolution);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            std::size_t hits = 0;
            for (std::size_t sr = 0; sr < ss; ++sr) {
                for (std::size_t sc = 0; sc < ss; ++sc) {
                    const double y =
                        (static_cast<double>(r) + (static_cast<double>(sr) + 0.5) / ss) * px;
                    const double x =
                        (static_cast<double>(c) + (static_cast<double>(sc) + 0.5) / ss) * px;
                    for (std::size_t b = 0; b < s.count(); ++b) {
                        const double dx = x - s.positions(b, 0);
                        const double dy = y - s.positions(b, 1);
                        if (dx * dx + dy * dy <= s.radius * s.radius) {
                            ++hits;
                            break;
                        }
                    }
                }
            }
            img(r, c) = static_cast<double>(hits) / static_cast<double>(ss * ss);
        }
    }
    return img;
}

inline SequenceData gen_bouncing_balls(const Rng& rng, std::size_t n_sequences, std::size_t T,
                                       std::size_t resolution, std::size_t n_balls = 3,
                                       double radius = 1.2, double box_size = 10.0,
                                       std::size_t substeps = 10, double speed = 0.5) {
    SequenceData data;
    data.n = n_sequences;
    data.T = T;
    data.dim = resolution * resolution;
    data.frames.assign(T, Matrix(data.dim, n_sequences));
    data.labels.assign(n_sequences, -1);
    data.gen_params = Matrix(n_sequences, 4);

    // Packing guard before any work.
    if (n_balls == 0 || static_cast<double>(n_balls) * M_PI * radius * radius >
                            0.5 * box_size * box_size)
        throw std::invalid_argument("gen_bouncing_balls: impossible packing");

    const double dt = 1.0 / static_cast<double>(substeps);
    parallel_for(n_sequences, [&](std::size_t i) {
        Rng sub = rng.split(i);
        BallState state = init_balls(sub, n_balls, radius, box_size, speed);
        data.gen_params(i, 0) = state.velocities(0, 0);
        data.gen_params(i, 1) = state.velocities(0, 1);
        for (std::size_t t = 0; t < T; ++t) {
            if (t > 0)
                for (std::size_t sstep = 0; sstep < substeps; ++sstep) advance_substep(state, dt);
            data.frames[t].set_col(i, flatten(render_balls(state, resolution)));
        }
    });
    return data;
}

// --- splits ------------------------------------------------------------

inline SequenceData take_subset(const SequenceData& data, const std::vector<std::size_t>& idx) {
    SequenceData out;
    out.n = idx.size();
    out.T = data.T;
    out.dim = data.dim;
    out.frames.reserve(data.T);
    for (const auto& f : data.frames) out.frames.push_back(f.gather_cols(idx));
    out.labels.reserve(idx.size());
    for (auto i : idx) out.labels.push_back(data.labels[i]);
    out.gen_params = Matrix(idx.size(), 4);
    for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t c = 0; c < 4; ++c) out.gen_params(k, c) = data.gen_params(idx[k], c);
    return out;
}

struct DatasetSplit {
    SequenceData train;
    SequenceData valid;
    SequenceData test;
};

// Disjoint shuffled partitions of the requested sizes.
inline DatasetSplit split_dataset(const SequenceData& data, std::size_t n_train,
                                  std::size_t n_valid, std::size_t n_test, Rng& rng) {
    if (n_train + n_valid + n_test > data.n)
        throw std::invalid_argument("split_dataset: requested " +
                                    std::to_string(n_train + n_valid + n_test) +
                                    " samples from " + std::to_string(data.n));
    const auto order = shuffled_indices(rng, data.n);
    auto slice = [&](std::size_t lo, std::size_t len) {
        return std::vector<std::size_t>(order.begin() + lo, order.begin() + lo + len);
    };
    DatasetSplit split;
    split.train = take_subset(data, slice(0, n_train));
    split.valid = take_subset(data, slice(n_train, n_valid));
    split.test = take_subset(data, slice(n_train + n_valid, n_test));
    return split;
}

} // namespace relseq
