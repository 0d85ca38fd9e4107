#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include "cdomm/errors.hpp"

namespace cdomm::mc {

struct Estimate {
    double mean = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
    long n = 0;

    bool se_defined() const { return n > 1; }
    // |mean - target| in units of SE.
    double z(double target) const { return se > 0.0 ? (mean - target) / se : (mean == target ? 0.0 : INFINITY); }
    bool within(double target, double k_se) const { return std::abs(mean - target) <= k_se * se; }
};

// Running mean and centred second moment of a vector of statistics; merged with the
// parallel update of Chan et al. so results do not depend on how samples are grouped.
class Accumulator {
  public:
    explicit Accumulator(int dims = 0) : mean_(dims, 0.0), m2_(dims, 0.0) {}

    int dims() const { return static_cast<int>(mean_.size()); }
    long count() const { return n_; }

    void add(const double* x) {
        ++n_;
        for (int i = 0; i < dims(); ++i) {
            const double d = x[i] - mean_[i];
            mean_[i] += d / n_;
            m2_[i] += d * (x[i] - mean_[i]);
        }
    }

    void merge(const Accumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = n_, nb = o.n_, nt = na + nb;
        for (int i = 0; i < dims(); ++i) {
            const double d = o.mean_[i] - mean_[i];
            mean_[i] += d * nb / nt;
            m2_[i] += o.m2_[i] + d * d * na * nb / nt;
        }
        n_ += o.n_;
    }

    Estimate get(int i) const {
        Estimate e;
        e.n = n_;
        e.mean = mean_.at(i);
        if (n_ > 1) e.se = std::sqrt(m2_[i] / (n_ - 1) / n_);
        return e;
    }

    std::vector<Estimate> all() const {
        std::vector<Estimate> v;
        for (int i = 0; i < dims(); ++i) v.push_back(get(i));
        return v;
    }

  private:
    long n_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

inline Accumulator merge_tree(const std::vector<Accumulator>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    Accumulator a = merge_tree(parts, lo, mid);
    a.merge(merge_tree(parts, mid, hi));
    return a;
}

struct RunOptions {
    int threads = 1;
    long block = 1024;
};

// Evaluates fn(sample_index, out) for every sample and reduces the `dims` statistics. Samples are
// grouped in fixed blocks, each block is accumulated in index order and blocks are merged in a
// fixed binary tree, so the result is identical for any thread count.
template <class Fn>
Accumulator run(long samples, int dims, Fn&& fn, RunOptions opt = {}) {
    require(samples >= 1, "mc::run needs at least one sample");
    const long nblocks = (samples + opt.block - 1) / opt.block;
    std::vector<Accumulator> parts(nblocks, Accumulator(dims));
    std::atomic<long> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        std::vector<double> out(dims);
        try {
            for (long b = next++; b < nblocks; b = next++) {
                const long lo = b * opt.block, hi = std::min(samples, lo + opt.block);
                for (long s = lo; s < hi; ++s) {
                    std::fill(out.begin(), out.end(), 0.0);
                    fn(s, out.data());
                    for (int i = 0; i < dims; ++i)
                        if (!std::isfinite(out[i]))
                            throw NumericSingularity("mc", NAN, -1, NAN,
                                                     "non-finite sample in path " + std::to_string(s) +
                                                         " statistic " + std::to_string(i));
                    parts[b].add(out.data());
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!err) err = std::current_exception();
            next = nblocks;
        }
    };
    const int nt = std::max(1, std::min<int>(opt.threads, static_cast<int>(nblocks)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);
    return merge_tree(parts, 0, parts.size());
}

} // namespace cdomm::mc
