#include "renv/environment.hpp"

#include <cmath>
#include <stdexcept>

#include "renv/errors.hpp"

namespace renv {

namespace {

constexpr std::uint64_t kEnvTag = 0x656e7670617468ull;

// Unique counter per (level, signed index); levels are re-based to >= 0.
std::uint64_t draw_ctr(int level, std::int64_t idx) {
    const auto l = static_cast<std::uint64_t>(level - EnvironmentPath::kTopLevel);
    return (l << 56) ^ (static_cast<std::uint64_t>(idx) & 0x00ffffffffffffffull);
}

}  // namespace

std::string to_string(PathKind k) {
    switch (k) {
        case PathKind::wiener: return "random-wiener";
        case PathKind::deterministic_sqrt: return "deterministic-sqrt";
        case PathKind::zero: return "zero";
        case PathKind::synthetic_linear: return "synthetic-linear";
    }
    return "unknown";
}

PathKind path_kind_from_string(const std::string& s) {
    if (s == "random-wiener" || s == "wiener") return PathKind::wiener;
    if (s == "deterministic-sqrt" || s == "sqrt") return PathKind::deterministic_sqrt;
    if (s == "zero") return PathKind::zero;
    if (s == "synthetic-linear" || s == "linear") return PathKind::synthetic_linear;
    throw ConfigError("unknown path kind: " + s);
}

std::shared_ptr<EnvironmentPath> EnvironmentPath::sample(std::uint64_t seed, double half_width,
                                                         int base_level) {
    if (half_width <= 0 || base_level < 0) throw ConfigError("sample_path: bad parameters");
    auto p = std::shared_ptr<EnvironmentPath>(new EnvironmentPath());
    p->kind_ = PathKind::wiener;
    p->seed_ = seed;
    p->base_level_ = base_level;
    p->max_level_ = base_level;
    p->half_width_ = std::ceil(half_width);
    p->cap_ = std::max(p->cap_, p->half_width_);
    p->stream_ = rng::stream(seed, kEnvTag);
    p->ensure_tops(
        static_cast<std::int64_t>(std::ceil(std::ldexp(p->half_width_, kTopLevel))) + 1);
    return p;
}

std::shared_ptr<EnvironmentPath> EnvironmentPath::deterministic_sqrt(double half_width,
                                                                     int base_level) {
    auto p = std::shared_ptr<EnvironmentPath>(new EnvironmentPath());
    p->kind_ = PathKind::deterministic_sqrt;
    p->base_level_ = base_level;
    p->max_level_ = base_level;
    p->half_width_ = std::ceil(half_width);
    p->cap_ = std::max(p->cap_, p->half_width_);
    return p;
}

std::shared_ptr<EnvironmentPath> EnvironmentPath::zero(double half_width, int base_level) {
    auto p = std::shared_ptr<EnvironmentPath>(new EnvironmentPath());
    p->kind_ = PathKind::zero;
    p->base_level_ = base_level;
    p->max_level_ = base_level;
    p->half_width_ = std::ceil(half_width);
    p->cap_ = std::max(p->cap_, p->half_width_);
    return p;
}

std::shared_ptr<EnvironmentPath> EnvironmentPath::synthetic_linear(double slope, double half_width,
                                                                   int base_level) {
    auto p = std::shared_ptr<EnvironmentPath>(new EnvironmentPath());
    p->kind_ = PathKind::synthetic_linear;
    p->slope_ = slope;
    p->base_level_ = base_level;
    p->max_level_ = base_level;
    p->half_width_ = std::ceil(half_width);
    p->cap_ = std::max(p->cap_, p->half_width_);
    return p;
}

std::shared_ptr<EnvironmentPath> EnvironmentPath::from_values(PathKind kind, std::uint64_t seed,
                                                              double half_width, int base_level,
                                                              std::span<const double> pos,
                                                              std::span<const double> neg,
                                                              double slope) {
    std::shared_ptr<EnvironmentPath> p;
    switch (kind) {
        case PathKind::wiener: p = sample(seed, half_width, base_level); break;
        case PathKind::deterministic_sqrt: p = deterministic_sqrt(half_width, base_level); break;
        case PathKind::zero: p = zero(half_width, base_level); break;
        case PathKind::synthetic_linear: p = synthetic_linear(slope, half_width, base_level); break;
    }
    for (std::size_t i = 0; i < pos.size(); ++i)
        if (p->dyadic_value(base_level, static_cast<std::int64_t>(i)) != pos[i])
            throw ConfigError("path import: stored values disagree with the seed");
    for (std::size_t i = 0; i < neg.size(); ++i)
        if (p->dyadic_value(base_level, -static_cast<std::int64_t>(i)) != neg[i])
            throw ConfigError("path import: stored values disagree with the seed");
    return p;
}

void EnvironmentPath::ensure_tops(std::int64_t cells) {
    const double sd = std::sqrt(std::ldexp(1.0, -kTopLevel));
    auto old_pos = static_cast<std::int64_t>(tops_pos_.size());
    if (old_pos == 0) {
        tops_pos_.push_back(0.0);
        old_pos = 1;
    }
    for (std::int64_t i = old_pos - 1; i < cells; ++i)
        tops_pos_.push_back(tops_pos_.back() + sd * rng::normal(stream_, draw_ctr(kTopLevel, i)));
    auto old_neg = static_cast<std::int64_t>(tops_neg_.size());
    if (old_neg == 0) {
        tops_neg_.push_back(0.0);
        old_neg = 1;
    }
    for (std::int64_t i = old_neg - 1; i < cells; ++i)
        tops_neg_.push_back(tops_neg_.back() +
                            sd * rng::normal(stream_, draw_ctr(kTopLevel, -(i + 1))));
}

void EnvironmentPath::set_half_width_cap(double cap) {
    cap_ = std::max(cap, half_width_);
    if (kind_ == PathKind::wiener)
        ensure_tops(static_cast<std::int64_t>(std::ceil(std::ldexp(cap_, kTopLevel))) + 1);
}

void EnvironmentPath::ensure_half_width(double r) {
    if (r <= half_width_) return;
    double target = half_width_;
    while (target < r) target *= 2.0;
    if (target > cap_)
        throw OutOfWindow("environment window would exceed cap " + std::to_string(cap_));
    if (kind_ == PathKind::wiener)
        ensure_tops(static_cast<std::int64_t>(std::ceil(std::ldexp(target, kTopLevel))) + 1);
    half_width_ = target;
}

double EnvironmentPath::top_value(std::int64_t idx) const {
    if (idx >= 0) {
        if (idx >= static_cast<std::int64_t>(tops_pos_.size()))
            throw OutOfWindow("dyadic index beyond the represented window");
        return tops_pos_[static_cast<std::size_t>(idx)];
    }
    if (-idx >= static_cast<std::int64_t>(tops_neg_.size()))
        throw OutOfWindow("dyadic index beyond the represented window");
    return tops_neg_[static_cast<std::size_t>(-idx)];
}

double EnvironmentPath::analytic_value(double x) const {
    switch (kind_) {
        case PathKind::zero: return 0.0;
        case PathKind::deterministic_sqrt: return std::sqrt(std::fabs(x));
        case PathKind::synthetic_linear: return slope_ * x;
        default: break;
    }
    throw std::logic_error("analytic_value on a random path");
}

double EnvironmentPath::dyadic_value(int level, std::int64_t idx) const {
    if (analytic()) return analytic_value(std::ldexp(static_cast<double>(idx), -level));
    if (level <= kTopLevel) return top_value(idx << (kTopLevel - level));
    if ((idx & 1) == 0) return dyadic_value(level - 1, idx / 2);

    const std::uint64_t key = draw_ctr(level, idx);
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = nodes_.find(key);
        if (it != nodes_.end()) return it->second;
    }
    // Bridge midpoint; parents are computed outside the lock (recomputation
    // races are benign because values are deterministic).
    const double left = dyadic_value(level - 1, (idx - 1) / 2);
    const double right = dyadic_value(level - 1, (idx + 1) / 2);
    const double sd = std::sqrt(std::ldexp(1.0, -(level + 1)));
    const double v = 0.5 * (left + right) + sd * rng::normal(stream_, key);
    {
        std::lock_guard<std::mutex> lk(mu_);
        nodes_.emplace(key, v);
    }
    return v;
}

double EnvironmentPath::evaluate(double x) const {
    if (std::fabs(x) > half_width_)
        throw OutOfWindow("evaluate at |x|=" + std::to_string(std::fabs(x)) + " > half_width " +
                          std::to_string(half_width_));
    if (analytic()) return analytic_value(x);
    const auto idx = static_cast<std::int64_t>(std::llround(std::ldexp(x, max_level_)));
    return dyadic_value(max_level_, idx);
}

double EnvironmentPath::polyline_value(int level, double x) const {
    if (std::fabs(x) > half_width_)
        throw OutOfWindow("polyline_value at |x|=" + std::to_string(std::fabs(x)) +
                          " > half_width " + std::to_string(half_width_));
    if (analytic()) return analytic_value(x);
    level = std::max(kMinLevel, std::min(level, base_level_ + kMaxRefineDepth));
    const double u = std::ldexp(x, level);
    const double fl = std::floor(u);
    const auto i = static_cast<std::int64_t>(fl);
    if (u == fl) return dyadic_value(level, i);
    const double a = dyadic_value(level, i);
    const double b = dyadic_value(level, i + 1);
    return a + (u - fl) * (b - a);
}

void EnvironmentPath::refine_to(int level) {
    max_level_ = std::min(std::max(max_level_, level), base_level_ + kMaxRefineDepth);
}

std::vector<double> EnvironmentPath::base_values_pos() const {
    const auto n = static_cast<std::size_t>(std::ldexp(half_width_, base_level_));
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        v[i] = analytic() ? analytic_value(std::ldexp(static_cast<double>(i), -base_level_))
                          : dyadic_value(base_level_, static_cast<std::int64_t>(i));
    return v;
}

std::vector<double> EnvironmentPath::base_values_neg() const {
    const auto n = static_cast<std::size_t>(std::ldexp(half_width_, base_level_));
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        v[i] = analytic() ? analytic_value(-std::ldexp(static_cast<double>(i), -base_level_))
                          : dyadic_value(base_level_, -static_cast<std::int64_t>(i));
    return v;
}

EnvView EnvView::scale(double lambda) const {
    if (lambda <= 0) throw ConfigError("scale: lambda must be positive");
    return {path_, coef_ / std::sqrt(lambda), lam_ * lambda};
}

EnvView EnvView::flow(double t) const { return scale(std::exp(0.5 * t)); }

bool EnvView::flow_invariant() const {
    return path_->kind() == PathKind::zero || path_->kind() == PathKind::deterministic_sqrt;
}

std::shared_ptr<EnvironmentPath> sample_path(std::uint64_t seed, double half_width,
                                             int base_level) {
    return EnvironmentPath::sample(seed, half_width, base_level);
}

std::vector<double> ou_section(const EnvView& env, double x, std::span<const double> t_grid) {
    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) out.push_back(env.flow(t).evaluate(x));
    return out;
}

}  // namespace renv
