#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>

#include <Eigen/Dense>

#include "risloc/geometry.hpp"

namespace risloc::detail {

/// Zero-padded inverse DFT matching the estimator's convention:
/// out[l] = (1/nf) sum_m exp(+2j pi l m / nf) in[m].
/// Plans are cached per length; the cache mutex also serializes
/// execution on the shared buffers.
class IfftCache {
public:
    static IfftCache& instance() {
        static IfftCache cache;
        return cache;
    }

    Eigen::VectorXcd ifft_padded(const Eigen::VectorXcd& in, int nf) {
        if (nf < in.size()) throw std::invalid_argument("IFFT length shorter than input");
        std::lock_guard<std::mutex> lock(mutex_);
        Plan& p = plan1d(nf);
        auto* buf = reinterpret_cast<cd*>(p.buf);
        std::fill(buf, buf + nf, cd(0.0, 0.0));
        std::copy(in.data(), in.data() + in.size(), buf);
        fftw_execute(p.plan);
        Eigen::VectorXcd out(nf);
        std::transform(reinterpret_cast<cd*>(p.out), reinterpret_cast<cd*>(p.out) + nf,
                       out.data(), [nf](cd v) { return v / static_cast<double>(nf); });
        return out;
    }

    /// 2D variant: out[a,b] = (1/(nfr*nfc)) sum_{l,m} exp(+2j pi (a l / nfr + b m / nfc)) in[l,m].
    Eigen::MatrixXcd ifft2_padded(const Eigen::MatrixXcd& in, int nfr, int nfc) {
        if (nfr < in.rows() || nfc < in.cols())
            throw std::invalid_argument("2D IFFT size shorter than input");
        std::lock_guard<std::mutex> lock(mutex_);
        Plan& p = plan2d(nfr, nfc);
        auto* buf = reinterpret_cast<cd*>(p.buf);
        std::fill(buf, buf + static_cast<size_t>(nfr) * nfc, cd(0.0, 0.0));
        // fftw uses row-major layout: index = l * nfc + m
        for (Eigen::Index l = 0; l < in.rows(); ++l)
            for (Eigen::Index m = 0; m < in.cols(); ++m)
                buf[l * nfc + m] = in(l, m);
        fftw_execute(p.plan);
        Eigen::MatrixXcd out(nfr, nfc);
        const auto* res = reinterpret_cast<cd*>(p.out);
        const double scale = 1.0 / (static_cast<double>(nfr) * nfc);
        for (int l = 0; l < nfr; ++l)
            for (int m = 0; m < nfc; ++m) out(l, m) = res[l * nfc + m] * scale;
        return out;
    }

private:
    struct Plan {
        fftw_complex* buf = nullptr;
        fftw_complex* out = nullptr;
        fftw_plan plan = nullptr;
        ~Plan() {
            if (plan) fftw_destroy_plan(plan);
            if (buf) fftw_free(buf);
            if (out) fftw_free(out);
        }
    };

    Plan& plan1d(int nf) {
        auto it = plans1d_.find(nf);
        if (it == plans1d_.end()) {
            auto& p = plans1d_[nf];
            p.buf = fftw_alloc_complex(nf);
            p.out = fftw_alloc_complex(nf);
            p.plan = fftw_plan_dft_1d(nf, p.buf, p.out, FFTW_BACKWARD, FFTW_ESTIMATE);
            return p;
        }
        return it->second;
    }

    Plan& plan2d(int nfr, int nfc) {
        auto key = std::make_pair(nfr, nfc);
        auto it = plans2d_.find(key);
        if (it == plans2d_.end()) {
            auto& p = plans2d_[key];
            const size_t n = static_cast<size_t>(nfr) * nfc;
            p.buf = fftw_alloc_complex(n);
            p.out = fftw_alloc_complex(n);
            p.plan = fftw_plan_dft_2d(nfr, nfc, p.buf, p.out, FFTW_BACKWARD, FFTW_ESTIMATE);
            return p;
        }
        return it->second;
    }

    std::mutex mutex_;
    std::map<int, Plan> plans1d_;
    std::map<std::pair<int, int>, Plan> plans2d_;
};

inline Eigen::VectorXcd ifft_padded(const Eigen::VectorXcd& in, int nf) {
    return IfftCache::instance().ifft_padded(in, nf);
}

inline Eigen::MatrixXcd ifft2_padded(const Eigen::MatrixXcd& in, int nfr, int nfc) {
    return IfftCache::instance().ifft2_padded(in, nfr, nfc);
}

}  // namespace risloc::detail
