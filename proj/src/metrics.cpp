#include "nrs/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace nrs {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

DepthMetrics depth_metrics(const ImageGrid &pred, const ImageGrid &gt, double max_depth,
                           double min_depth) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("depth_metrics: shape mismatch");
    std::vector<double> p, g;
    for (size_t i = 0; i < gt.data.size(); ++i) {
        if (gt.data[i] > 0 && gt.data[i] <= max_depth) {
            p.push_back(pred.data[i]);
            g.push_back(gt.data[i]);
        }
    }
    if (g.empty()) throw std::runtime_error("depth_metrics: no valid pixels");
    const double scale = median(g) / median(p);
    DepthMetrics m;
    double se = 0, sle = 0;
    const double n = static_cast<double>(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        const double pi = std::clamp(p[i] * scale, min_depth, max_depth);
        const double gi = g[i];
        m.abs_rel += std::abs(pi - gi) / gi;
        m.sq_rel += (pi - gi) * (pi - gi) / gi;
        se += (pi - gi) * (pi - gi);
        sle += (std::log(pi) - std::log(gi)) * (std::log(pi) - std::log(gi));
        const double ratio = std::max(pi / gi, gi / pi);
        m.delta1 += ratio < 1.25;
        m.delta2 += ratio < 1.25 * 1.25;
        m.delta3 += ratio < 1.25 * 1.25 * 1.25;
    }
    m.abs_rel /= n;
    m.sq_rel /= n;
    m.rmse = std::sqrt(se / n);
    m.rmse_log = std::sqrt(sle / n);
    m.delta1 /= n;
    m.delta2 /= n;
    m.delta3 /= n;
    return m;
}

namespace {

double aligned_rmse(const std::vector<Vec3> &pred, const std::vector<Vec3> &gt) {
    const size_t n = pred.size();
    Eigen::Vector3d mu_p = Eigen::Vector3d::Zero(), mu_g = Eigen::Vector3d::Zero();
    auto to_e = [](const Vec3 &v) { return Eigen::Vector3d(v.x, v.y, v.z); };
    for (size_t i = 0; i < n; ++i) {
        mu_p += to_e(pred[i]);
        mu_g += to_e(gt[i]);
    }
    mu_p /= static_cast<double>(n);
    mu_g /= static_cast<double>(n);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    double var_p = 0, var_g = 0;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d dp = to_e(pred[i]) - mu_p;
        const Eigen::Vector3d dg = to_e(gt[i]) - mu_g;
        cov += dg * dp.transpose();
        var_p += dp.squaredNorm();
        var_g += dg.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_p /= static_cast<double>(n);
    var_g /= static_cast<double>(n);
    if (var_g < 1e-18) throw std::runtime_error("ate: degenerate ground-truth trajectory");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2) = -1;
    const Eigen::Matrix3d rot = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    // Degenerate predictions (all positions equal) keep scale 1 and reduce
    // to rigid alignment of the centroid.
    const double scale =
        var_p < 1e-18 ? 1.0 : (svd.singularValues().dot(d)) / var_p;
    const Eigen::Vector3d t = mu_g - scale * rot * mu_p;

    double se = 0;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d r = scale * rot * to_e(pred[i]) + t - to_e(gt[i]);
        se += r.squaredNorm();
    }
    return std::sqrt(se / static_cast<double>(n));
}

std::vector<Vec3> positions(const std::vector<Pose> &poses) {
    std::vector<Vec3> out;
    out.reserve(poses.size());
    for (const Pose &p : poses) out.push_back(p.translation);
    return out;
}

} // namespace

double ate_full(const std::vector<Pose> &pred, const std::vector<Pose> &gt) {
    if (pred.size() != gt.size() || pred.size() < 2)
        throw std::invalid_argument("ate_full: need equal-length trajectories of >= 2 poses");
    return aligned_rmse(positions(pred), positions(gt));
}

SnippetAte ate_snippets(const std::vector<Pose> &pred, const std::vector<Pose> &gt, int snippet) {
    if (pred.size() != gt.size()) throw std::invalid_argument("ate_snippets: length mismatch");
    if (static_cast<int>(pred.size()) < snippet)
        throw std::invalid_argument("ate_snippets: trajectory shorter than snippet");
    const auto pp = positions(pred), gp = positions(gt);
    std::vector<double> errs;
    for (size_t s = 0; s + snippet <= pp.size(); ++s) {
        const std::vector<Vec3> wp(pp.begin() + s, pp.begin() + s + snippet);
        const std::vector<Vec3> wg(gp.begin() + s, gp.begin() + s + snippet);
        errs.push_back(aligned_rmse(wp, wg));
    }
    SnippetAte out;
    for (double e : errs) out.mean += e;
    out.mean /= static_cast<double>(errs.size());
    for (double e : errs) out.stddev += (e - out.mean) * (e - out.mean);
    out.stddev = std::sqrt(out.stddev / static_cast<double>(errs.size()));
    return out;
}

double surface_cov(const std::vector<RaySurface> &surfaces) {
    if (surfaces.size() < 2) throw std::invalid_argument("surface_cov: need >= 2 surfaces");
    for (size_t i = 1; i < surfaces.size(); ++i)
        if (!surfaces[i].rays.same_shape(surfaces[0].rays))
            throw std::invalid_argument("surface_cov: shape mismatch");
    const size_t n = surfaces[0].rays.data.size();
    const double count = static_cast<double>(surfaces.size());
    double total = 0;
    size_t included = 0;
    for (size_t i = 0; i < n; ++i) {
        double mean = 0;
        for (const RaySurface &s : surfaces) mean += s.rays.data[i];
        mean /= count;
        // Exclude near-zero means: for unit rays a component this far below
        // the ray norm has no stable sign, and stddev/|mean| blows up there
        // (e.g. the x component along the principal column).
        if (std::abs(mean) < 1e-2) continue;
        double var = 0;
        for (const RaySurface &s : surfaces) var += (s.rays.data[i] - mean) * (s.rays.data[i] - mean);
        var /= count;
        total += std::sqrt(var) / std::abs(mean);
        ++included;
    }
    if (included == 0) return 0.0;
    return total / static_cast<double>(included);
}

namespace {

void write_report(const std::string &txt_path, const std::string &json_path,
                  const std::vector<std::pair<std::string, double>> &fields) {
    std::ofstream txt(txt_path);
    if (!txt) throw std::runtime_error("cannot write " + txt_path);
    txt.precision(10);
    nlohmann::json j;
    for (const auto &[k, v] : fields) {
        txt << k << "=" << v << "\n";
        j[k] = v;
    }
    std::ofstream js(json_path);
    if (!js) throw std::runtime_error("cannot write " + json_path);
    js << j.dump(2) << "\n";
}

} // namespace

void write_depth_report(const std::string &txt_path, const std::string &json_path,
                        const DepthMetrics &m) {
    write_report(txt_path, json_path,
                 {{"abs_rel", m.abs_rel},
                  {"sq_rel", m.sq_rel},
                  {"rmse", m.rmse},
                  {"rmse_log", m.rmse_log},
                  {"delta1", m.delta1},
                  {"delta2", m.delta2},
                  {"delta3", m.delta3}});
}

void write_odom_report(const std::string &txt_path, const std::string &json_path, double ate,
                       const SnippetAte &snippets) {
    write_report(txt_path, json_path,
                 {{"ate_full", ate},
                  {"ate_snippet_mean", snippets.mean},
                  {"ate_snippet_stddev", snippets.stddev}});
}

} // namespace nrs
