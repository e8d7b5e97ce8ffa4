#include "kseg/nn/layers.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>

namespace kseg::nn {
namespace {

// Bound on the per-slab im2col buffer.
constexpr long kColBudgetBytes = 96L * 1024 * 1024;

struct ConvDims {
    long n, ci, d, h, w;       // input
    long co, od, oh, ow;       // output
    long kz, ky, kx, kvol;
    long sz, sy, sx;
    long pz, py, px;
    long in_plane() const { return d * h * w; }
    long out_plane() const { return od * oh * ow; }
};

// Valid output-index range [lo, hi) along one axis for a given kernel tap:
// positions where o*stride + k - pad lands inside the input.
inline void tap_range(long k, long pad, long stride, long in_len, long out_len, long& lo,
                      long& hi) {
    long shift = k - pad;
    lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    long last = (in_len - 1 - shift) / stride;  // shift <= in_len-1 always holds for our kernels
    hi = std::min(out_len, last + 1);
    lo = std::min(lo, hi);
}

// Fills im2col rows for output slab [oz0, oz1). Row r = (ci, kz, ky, kx),
// columns are slab voxels in (z, y, x) order.
void im2col_slab(const float* x, const ConvDims& c, long oz0, long oz1, float* col) {
    const long rows = c.ci * c.kvol;
    const long slab_n = (oz1 - oz0) * c.oh * c.ow;
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
        long ci = r / c.kvol;
        long t = r % c.kvol;
        long kz = t / (c.ky * c.kx);
        long ky = (t / c.kx) % c.ky;
        long kx = t % c.kx;
        float* row = col + r * slab_n;
        const float* src_ch = x + ci * c.in_plane();
        long ylo, yhi, xlo, xhi;
        tap_range(ky, c.py, c.sy, c.h, c.oh, ylo, yhi);
        tap_range(kx, c.px, c.sx, c.w, c.ow, xlo, xhi);
        for (long oz = oz0; oz < oz1; ++oz) {
            float* seg = row + (oz - oz0) * c.oh * c.ow;
            long iz = oz * c.sz + kz - c.pz;
            if (iz < 0 || iz >= c.d) {
                std::memset(seg, 0, sizeof(float) * c.oh * c.ow);
                continue;
            }
            const float* src_z = src_ch + iz * c.h * c.w;
            for (long oy = 0; oy < c.oh; ++oy) {
                float* dst = seg + oy * c.ow;
                if (oy < ylo || oy >= yhi) {
                    std::memset(dst, 0, sizeof(float) * c.ow);
                    continue;
                }
                long iy = oy * c.sy + ky - c.py;
                const float* src_y = src_z + iy * c.w;
                if (xlo > 0) std::memset(dst, 0, sizeof(float) * xlo);
                if (xhi < c.ow) std::memset(dst + xhi, 0, sizeof(float) * (c.ow - xhi));
                if (c.sx == 1) {
                    std::memcpy(dst + xlo, src_y + xlo + kx - c.px,
                                sizeof(float) * (xhi - xlo));
                } else {
                    for (long ox = xlo; ox < xhi; ++ox)
                        dst[ox] = src_y[ox * c.sx + kx - c.px];
                }
            }
        }
    }
}

// Scatter-add of column gradients back onto the input gradient. Parallel
// over input channels; each thread owns disjoint channel planes.
void col2im_slab(const float* dcol, const ConvDims& c, long oz0, long oz1, float* dx) {
    const long slab_n = (oz1 - oz0) * c.oh * c.ow;
#pragma omp parallel for schedule(static)
    for (long ci = 0; ci < c.ci; ++ci) {
        float* dst_ch = dx + ci * c.in_plane();
        for (long t = 0; t < c.kvol; ++t) {
            long kz = t / (c.ky * c.kx);
            long ky = (t / c.kx) % c.ky;
            long kx = t % c.kx;
            const float* row = dcol + (ci * c.kvol + t) * slab_n;
            long ylo, yhi, xlo, xhi;
            tap_range(ky, c.py, c.sy, c.h, c.oh, ylo, yhi);
            tap_range(kx, c.px, c.sx, c.w, c.ow, xlo, xhi);
            for (long oz = oz0; oz < oz1; ++oz) {
                long iz = oz * c.sz + kz - c.pz;
                if (iz < 0 || iz >= c.d) continue;
                const float* seg = row + (oz - oz0) * c.oh * c.ow;
                float* dst_z = dst_ch + iz * c.h * c.w;
                for (long oy = ylo; oy < yhi; ++oy) {
                    long iy = oy * c.sy + ky - c.py;
                    const float* src = seg + oy * c.ow;
                    float* dst_y = dst_z + iy * c.w + kx - c.px;
                    if (c.sx == 1) {
                        for (long ox = xlo; ox < xhi; ++ox) dst_y[ox] += src[ox];
                    } else {
                        for (long ox = xlo; ox < xhi; ++ox) dst_y[ox * c.sx] += src[ox];
                    }
                }
            }
        }
    }
}

long slab_depth(long rows, long plane, long out_d) {
    long per_z = rows * plane * static_cast<long>(sizeof(float));
    long slab = per_z > 0 ? kColBudgetBytes / per_z : out_d;
    return std::clamp(slab, 1L, out_d);
}

void sgemm(bool trans_a, bool trans_b, long m, long n, long k, const float* a, long lda,
           const float* b, long ldb, float beta, float* cmat, long ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.f, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, cmat, static_cast<int>(ldc));
}

}  // namespace

Conv3d::Conv3d(long in_ch, long out_ch, std::array<long, 3> kernel, std::array<long, 3> stride,
               std::array<long, 3> pad, bool bias, std::string name)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias), name_(std::move(name)) {
    w = Tensor({out_ch_, in_ch_, kernel_[0], kernel_[1], kernel_[2]});
    gw = like(w);
    if (has_bias_) {
        b = Tensor({out_ch_});
        gb = like(b);
    }
}

std::array<long, 5> Conv3d::output_shape(const std::array<long, 5>& in) const {
    auto out_len = [&](long len, int a) {
        return (len + 2 * pad_[a] - kernel_[a]) / stride_[a] + 1;
    };
    return {in[0], out_ch_, out_len(in[2], 0), out_len(in[3], 1), out_len(in[4], 2)};
}

TensorPtr Conv3d::forward(const TensorPtr& x, bool training) {
    if (x->ndim() != 5 || x->dim(1) != in_ch_)
        throw ShapeError("Conv3d " + name_ + ": bad input shape");
    ConvDims c{x->dim(0), in_ch_, x->dim(2), x->dim(3), x->dim(4),
               out_ch_, 0, 0, 0,
               kernel_[0], kernel_[1], kernel_[2], kernel_[0] * kernel_[1] * kernel_[2],
               stride_[0], stride_[1], stride_[2], pad_[0], pad_[1], pad_[2]};
    auto os = output_shape({c.n, c.ci, c.d, c.h, c.w});
    c.od = os[2];
    c.oh = os[3];
    c.ow = os[4];

    auto y = make_tensor({c.n, c.co, c.od, c.oh, c.ow});
    const long rows = c.ci * c.kvol;
    const long slab = slab_depth(rows, c.oh * c.ow, c.od);
    std::vector<float> col(static_cast<size_t>(rows) * slab * c.oh * c.ow);

    for (long n = 0; n < c.n; ++n) {
        const float* xn = x->data() + n * c.ci * c.in_plane();
        float* yn = y->data() + n * c.co * c.out_plane();
        for (long oz0 = 0; oz0 < c.od; oz0 += slab) {
            long oz1 = std::min(c.od, oz0 + slab);
            long slab_n = (oz1 - oz0) * c.oh * c.ow;
            im2col_slab(xn, c, oz0, oz1, col.data());
            // (out_ch x K) * (K x slab) written straight into the output
            // planes; ldc strides across channel planes.
            sgemm(false, false, c.co, slab_n, rows, w.data(), rows, col.data(), slab_n, 0.f,
                  yn + oz0 * c.oh * c.ow, c.out_plane());
        }
        if (has_bias_) {
#pragma omp parallel for schedule(static)
            for (long co = 0; co < c.co; ++co) {
                float* plane = yn + co * c.out_plane();
                float bias = b.v[co];
                for (long i = 0; i < c.out_plane(); ++i) plane[i] += bias;
            }
        }
    }
    if (training) cached_x_ = x;
    return y;
}

TensorPtr Conv3d::backward(const Tensor& gy, bool need_input_grad) {
    if (!cached_x_) throw ShapeError("Conv3d " + name_ + ": backward without forward");
    const Tensor& x = *cached_x_;
    ConvDims c{x.dim(0), in_ch_, x.dim(2), x.dim(3), x.dim(4),
               out_ch_, gy.dim(2), gy.dim(3), gy.dim(4),
               kernel_[0], kernel_[1], kernel_[2], kernel_[0] * kernel_[1] * kernel_[2],
               stride_[0], stride_[1], stride_[2], pad_[0], pad_[1], pad_[2]};

    TensorPtr gx;
    if (need_input_grad) gx = make_tensor({c.n, c.ci, c.d, c.h, c.w});

    const long rows = c.ci * c.kvol;
    const long slab = slab_depth(rows, c.oh * c.ow, c.od);
    std::vector<float> col(static_cast<size_t>(rows) * slab * c.oh * c.ow);
    std::vector<float> dcol(need_input_grad ? col.size() : 0);

    for (long n = 0; n < c.n; ++n) {
        const float* xn = x.data() + n * c.ci * c.in_plane();
        const float* gyn = gy.data() + n * c.co * c.out_plane();
        for (long oz0 = 0; oz0 < c.od; oz0 += slab) {
            long oz1 = std::min(c.od, oz0 + slab);
            long slab_n = (oz1 - oz0) * c.oh * c.ow;
            im2col_slab(xn, c, oz0, oz1, col.data());
            // dW += gy_slab * col^T
            sgemm(false, true, c.co, rows, slab_n, gyn + oz0 * c.oh * c.ow, c.out_plane(),
                  col.data(), slab_n, 1.f, gw.data(), rows);
            if (need_input_grad) {
                // dcol = W^T * gy_slab, then scatter back onto gx
                sgemm(true, false, rows, slab_n, c.co, w.data(), rows,
                      gyn + oz0 * c.oh * c.ow, c.out_plane(), 0.f, dcol.data(), slab_n);
                col2im_slab(dcol.data(), c, oz0, oz1,
                            gx->data() + n * c.ci * c.in_plane());
            }
        }
        if (has_bias_) {
            for (long co = 0; co < c.co; ++co) {
                const float* plane = gyn + co * c.out_plane();
                double acc = 0.0;
                for (long i = 0; i < c.out_plane(); ++i) acc += plane[i];
                gb.v[co] += static_cast<float>(acc);
            }
        }
    }
    cached_x_.reset();
    return gx;
}

void Conv3d::init_he_normal(std::mt19937_64& rng) {
    long fan_in = in_ch_ * kernel_[0] * kernel_[1] * kernel_[2];
    std::normal_distribution<float> dist(0.f, std::sqrt(2.f / static_cast<float>(fan_in)));
    for (float& x : w.v) x = dist(rng);
    if (has_bias_) b.zero();
}

void Conv3d::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".w", &w, &gw});
    if (has_bias_) out.push_back({name_ + ".b", &b, &gb});
}

ConvTranspose3d::ConvTranspose3d(long in_ch, long out_ch, std::array<long, 3> stride,
                                 std::string name)
    : in_ch_(in_ch), out_ch_(out_ch), stride_(stride), name_(std::move(name)) {
    w = Tensor({in_ch_, out_ch_, stride_[0], stride_[1], stride_[2]});
    gw = like(w);
}

TensorPtr ConvTranspose3d::forward(const TensorPtr& x, bool training) {
    if (x->ndim() != 5 || x->dim(1) != in_ch_)
        throw ShapeError("ConvTranspose3d " + name_ + ": bad input shape");
    const long n = x->dim(0), d = x->dim(2), h = x->dim(3), wd = x->dim(4);
    const long sz = stride_[0], sy = stride_[1], sx = stride_[2];
    const long kvol = sz * sy * sx;
    const long od = d * sz, oh = h * sy, ow = wd * sx;
    const long in_plane = d * h * wd, out_plane = od * oh * ow;

    // Permute weights to ((out_ch * taps) x in_ch) for a single GEMM.
    std::vector<float> wperm(static_cast<size_t>(out_ch_) * kvol * in_ch_);
    for (long ci = 0; ci < in_ch_; ++ci)
        for (long co = 0; co < out_ch_; ++co)
            for (long t = 0; t < kvol; ++t)
                wperm[(co * kvol + t) * in_ch_ + ci] = w.v[(ci * out_ch_ + co) * kvol + t];

    auto y = make_tensor({n, out_ch_, od, oh, ow});
    const long slab = std::clamp(kColBudgetBytes / std::max(1L, out_ch_ * kvol * h * wd * 4), 1L, d);
    std::vector<float> t_buf(static_cast<size_t>(out_ch_) * kvol * slab * h * wd);

    for (long ni = 0; ni < n; ++ni) {
        const float* xn = x->data() + ni * in_ch_ * in_plane;
        float* yn = y->data() + ni * out_ch_ * out_plane;
        for (long z0 = 0; z0 < d; z0 += slab) {
            long z1 = std::min(d, z0 + slab);
            long slab_n = (z1 - z0) * h * wd;
            sgemm(false, false, out_ch_ * kvol, slab_n, in_ch_, wperm.data(), in_ch_,
                  xn + z0 * h * wd, in_plane, 0.f, t_buf.data(), slab_n);
            // Each (tap, input voxel) pair owns a unique output voxel.
#pragma omp parallel for schedule(static)
            for (long co = 0; co < out_ch_; ++co) {
                for (long t = 0; t < kvol; ++t) {
                    long kz = t / (sy * sx), ky = (t / sx) % sy, kx = t % sx;
                    const float* src = t_buf.data() + (co * kvol + t) * slab_n;
                    for (long z = z0; z < z1; ++z)
                        for (long yy = 0; yy < h; ++yy) {
                            const float* s = src + ((z - z0) * h + yy) * wd;
                            float* dst = yn + co * out_plane +
                                         ((z * sz + kz) * oh + yy * sy + ky) * ow + kx;
                            for (long xx = 0; xx < wd; ++xx) dst[xx * sx] = s[xx];
                        }
                }
            }
        }
    }
    if (training) cached_x_ = x;
    return y;
}

TensorPtr ConvTranspose3d::backward(const Tensor& gy) {
    if (!cached_x_) throw ShapeError("ConvTranspose3d " + name_ + ": backward without forward");
    const Tensor& x = *cached_x_;
    const long n = x.dim(0), d = x.dim(2), h = x.dim(3), wd = x.dim(4);
    const long sz = stride_[0], sy = stride_[1], sx = stride_[2];
    const long kvol = sz * sy * sx;
    const long od = d * sz, oh = h * sy, ow = wd * sx;
    const long in_plane = d * h * wd, out_plane = od * oh * ow;

    std::vector<float> wperm(static_cast<size_t>(out_ch_) * kvol * in_ch_);
    for (long ci = 0; ci < in_ch_; ++ci)
        for (long co = 0; co < out_ch_; ++co)
            for (long t = 0; t < kvol; ++t)
                wperm[(co * kvol + t) * in_ch_ + ci] = w.v[(ci * out_ch_ + co) * kvol + t];
    std::vector<float> gwperm(wperm.size(), 0.f);

    auto gx = make_tensor({n, in_ch_, d, h, wd});
    const long slab = std::clamp(kColBudgetBytes / std::max(1L, out_ch_ * kvol * h * wd * 4), 1L, d);
    std::vector<float> t_buf(static_cast<size_t>(out_ch_) * kvol * slab * h * wd);

    for (long ni = 0; ni < n; ++ni) {
        const float* xn = x.data() + ni * in_ch_ * in_plane;
        const float* gyn = gy.data() + ni * out_ch_ * out_plane;
        for (long z0 = 0; z0 < d; z0 += slab) {
            long z1 = std::min(d, z0 + slab);
            long slab_n = (z1 - z0) * h * wd;
            // Gather output gradients into tap-major rows (inverse of the
            // forward scatter).
#pragma omp parallel for schedule(static)
            for (long co = 0; co < out_ch_; ++co) {
                for (long t = 0; t < kvol; ++t) {
                    long kz = t / (sy * sx), ky = (t / sx) % sy, kx = t % sx;
                    float* dst = t_buf.data() + (co * kvol + t) * slab_n;
                    for (long z = z0; z < z1; ++z)
                        for (long yy = 0; yy < h; ++yy) {
                            float* dd = dst + ((z - z0) * h + yy) * wd;
                            const float* s = gyn + co * out_plane +
                                             ((z * sz + kz) * oh + yy * sy + ky) * ow + kx;
                            for (long xx = 0; xx < wd; ++xx) dd[xx] = s[xx * sx];
                        }
                }
            }
            // dX = Wperm^T * T; every input voxel's gradient lives inside
            // its own slab, so this writes directly.
            sgemm(true, false, in_ch_, slab_n, out_ch_ * kvol, wperm.data(), in_ch_,
                  t_buf.data(), slab_n, 0.f, gx->data() + ni * in_ch_ * in_plane + z0 * h * wd,
                  in_plane);
            // dWperm += T * x_slab^T
            sgemm(false, true, out_ch_ * kvol, in_ch_, slab_n, t_buf.data(), slab_n,
                  xn + z0 * h * wd, in_plane, 1.f, gwperm.data(), in_ch_);
        }
    }
    for (long ci = 0; ci < in_ch_; ++ci)
        for (long co = 0; co < out_ch_; ++co)
            for (long t = 0; t < kvol; ++t)
                gw.v[(ci * out_ch_ + co) * kvol + t] += gwperm[(co * kvol + t) * in_ch_ + ci];
    cached_x_.reset();
    return gx;
}

void ConvTranspose3d::init_he_normal(std::mt19937_64& rng) {
    long fan_in = in_ch_ * stride_[0] * stride_[1] * stride_[2];
    std::normal_distribution<float> dist(0.f, std::sqrt(2.f / static_cast<float>(fan_in)));
    for (float& x : w.v) x = dist(rng);
}

void ConvTranspose3d::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".w", &w, &gw});
}

InstanceNorm3d::InstanceNorm3d(long channels, std::string name)
    : channels_(channels), name_(std::move(name)) {
    gamma = Tensor({channels_}, 1.f);
    g_gamma = Tensor({channels_});
    beta = Tensor({channels_});
    g_beta = like(beta);
}

TensorPtr InstanceNorm3d::forward(const TensorPtr& x, bool training) {
    if (x->ndim() != 5 || x->dim(1) != channels_)
        throw ShapeError("InstanceNorm3d " + name_ + ": bad input shape");
    const long n = x->dim(0), c = channels_;
    const long m = x->dim(2) * x->dim(3) * x->dim(4);
    auto y = make_tensor(x->shape);
    mean_.assign(static_cast<size_t>(n * c), 0.0);
    inv_std_.assign(static_cast<size_t>(n * c), 0.0);

#pragma omp parallel for schedule(static) collapse(2)
    for (long ni = 0; ni < n; ++ni)
        for (long ci = 0; ci < c; ++ci) {
            const float* src = x->data() + (ni * c + ci) * m;
            double sum = 0.0, sumsq = 0.0;
            for (long i = 0; i < m; ++i) {
                double v = src[i];
                sum += v;
                sumsq += v * v;
            }
            double mu = sum / m;
            double var = std::max(0.0, sumsq / m - mu * mu);
            double inv = 1.0 / std::sqrt(var + kEps);
            mean_[ni * c + ci] = mu;
            inv_std_[ni * c + ci] = inv;
            float g = gamma.v[ci], bb = beta.v[ci];
            float a = static_cast<float>(g * inv);
            float o = static_cast<float>(bb - g * mu * inv);
            float* dst = y->data() + (ni * c + ci) * m;
            for (long i = 0; i < m; ++i) dst[i] = a * src[i] + o;
        }
    if (training) cached_x_ = x;
    return y;
}

TensorPtr InstanceNorm3d::backward(const Tensor& gy) {
    if (!cached_x_) throw ShapeError("InstanceNorm3d " + name_ + ": backward without forward");
    const Tensor& x = *cached_x_;
    const long n = x.dim(0), c = channels_;
    const long m = x.dim(2) * x.dim(3) * x.dim(4);
    auto gx = make_tensor(x.shape);
    std::vector<double> s1(static_cast<size_t>(n * c)), s2(static_cast<size_t>(n * c));

#pragma omp parallel for schedule(static) collapse(2)
    for (long ni = 0; ni < n; ++ni)
        for (long ci = 0; ci < c; ++ci) {
            const float* xs = x.data() + (ni * c + ci) * m;
            const float* gys = gy.data() + (ni * c + ci) * m;
            double mu = mean_[ni * c + ci], inv = inv_std_[ni * c + ci];
            double a = 0.0, bacc = 0.0;
            for (long i = 0; i < m; ++i) {
                double xh = (xs[i] - mu) * inv;
                a += gys[i];
                bacc += gys[i] * xh;
            }
            s1[ni * c + ci] = a;
            s2[ni * c + ci] = bacc;
            double g = gamma.v[ci];
            double mean_gy = a / m, mean_gyxh = bacc / m;
            float* gxs = gx->data() + (ni * c + ci) * m;
            for (long i = 0; i < m; ++i) {
                double xh = (xs[i] - mu) * inv;
                gxs[i] = static_cast<float>(g * inv * (gys[i] - mean_gy - xh * mean_gyxh));
            }
        }
    for (long ci = 0; ci < c; ++ci) {
        double dg = 0.0, db = 0.0;
        for (long ni = 0; ni < n; ++ni) {
            dg += s2[ni * c + ci];
            db += s1[ni * c + ci];
        }
        g_gamma.v[ci] += static_cast<float>(dg);
        g_beta.v[ci] += static_cast<float>(db);
    }
    cached_x_.reset();
    return gx;
}

void InstanceNorm3d::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name_ + ".gamma", &gamma, &g_gamma});
    out.push_back({name_ + ".beta", &beta, &g_beta});
}

void InstanceNorm3d::clear_context() {
    cached_x_.reset();
    mean_.clear();
    inv_std_.clear();
}

TensorPtr LeakyReLU::forward(const TensorPtr& x, bool training) {
    float* p = x->data();
    const long n = x->numel();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
        if (p[i] < 0.f) p[i] *= kSlope;
    if (training) cached_y_ = x;
    return x;
}

TensorPtr LeakyReLU::backward(const Tensor& gy) {
    if (!cached_y_) throw ShapeError("LeakyReLU: backward without forward");
    auto gx = make_tensor(gy.shape);
    const float* y = cached_y_->data();
    const float* g = gy.data();
    float* out = gx->data();
    const long n = gy.numel();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = y[i] > 0.f ? g[i] : g[i] * kSlope;
    cached_y_.reset();
    return gx;
}

TensorPtr concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 5 || b.ndim() != 5 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3) || a.dim(4) != b.dim(4))
        throw ShapeError("concat_channels: spatial/batch shapes differ");
    const long n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const long plane = a.dim(2) * a.dim(3) * a.dim(4);
    auto y = make_tensor({n, ca + cb, a.dim(2), a.dim(3), a.dim(4)});
    for (long ni = 0; ni < n; ++ni) {
        std::memcpy(y->data() + ni * (ca + cb) * plane, a.data() + ni * ca * plane,
                    sizeof(float) * ca * plane);
        std::memcpy(y->data() + (ni * (ca + cb) + ca) * plane, b.data() + ni * cb * plane,
                    sizeof(float) * cb * plane);
    }
    return y;
}

void split_channels(const Tensor& gy, long a_channels, Tensor& ga, Tensor& gb) {
    const long n = gy.dim(0), c = gy.dim(1);
    const long cb = c - a_channels;
    const long plane = gy.dim(2) * gy.dim(3) * gy.dim(4);
    ga = Tensor({n, a_channels, gy.dim(2), gy.dim(3), gy.dim(4)});
    gb = Tensor({n, cb, gy.dim(2), gy.dim(3), gy.dim(4)});
    for (long ni = 0; ni < n; ++ni) {
        std::memcpy(ga.data() + ni * a_channels * plane, gy.data() + ni * c * plane,
                    sizeof(float) * a_channels * plane);
        std::memcpy(gb.data() + ni * cb * plane, gy.data() + (ni * c + a_channels) * plane,
                    sizeof(float) * cb * plane);
    }
}

TensorPtr add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
    auto y = make_tensor(a.shape);
    const long n = a.numel();
    const float* pa = a.data();
    const float* pb = b.data();
    float* py = y->data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) py[i] = pa[i] + pb[i];
    return y;
}

}  // namespace kseg::nn
