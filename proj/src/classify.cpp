#include "quskit/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "quskit/core.hpp"
#include "quskit/parallel.hpp"

namespace quskit {

std::string_view to_string(Subtype s) {
  switch (s) {
    case Subtype::malignant: return "malignant";
    case Subtype::fibroadenoma: return "fibroadenoma";
    case Subtype::inflammatory: return "inflammatory";
  }
  return "";
}

std::string_view to_string(Label l) { return l == Label::malignant ? "malignant" : "benign"; }

Subtype subtype_from_string(std::string_view name) {
  for (Subtype s : {Subtype::malignant, Subtype::fibroadenoma, Subtype::inflammatory})
    if (to_string(s) == name) return s;
  throw InvalidArgument("unknown subtype: " + std::string(name));
}

Label label_of(Subtype s) { return s == Subtype::malignant ? Label::malignant : Label::benign; }

std::string_view to_string(Normalization n) {
  return n == Normalization::min_max ? "min-max" : "z-score";
}

Normalization normalization_from_string(std::string_view name) {
  if (name == "min-max") return Normalization::min_max;
  if (name == "z-score") return Normalization::z_score;
  throw InvalidArgument("unknown normalization: " + std::string(name));
}

std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::lda_linear: return "lda_linear";
    case ClassifierKind::lda_quadratic: return "lda_quadratic";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::logistic: return "logistic";
    case ClassifierKind::naive_bayes: return "naive_bayes";
    case ClassifierKind::svm_linear: return "svm_linear";
  }
  return "";
}

ClassifierKind classifier_from_string(std::string_view name) {
  for (ClassifierKind k : kAllClassifiers)
    if (to_string(k) == name) return k;
  throw InvalidArgument("unknown classifier: " + std::string(name));
}

std::string_view to_string(FeatureSet f) { return f == FeatureSet::esd ? "esd" : "esd+mss"; }

FeatureSet feature_set_from_string(std::string_view name) {
  if (name == "esd") return FeatureSet::esd;
  if (name == "esd+mss") return FeatureSet::esd_mss;
  throw InvalidArgument("unknown feature set: " + std::string(name));
}

namespace {

void scale_feature(std::vector<CohortRecord>& records, double CohortRecord::*raw,
                   double CohortRecord::*norm, Normalization n) {
  const std::size_t size = records.size();
  if (n == Normalization::min_max) {
    const auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                              [&](const auto& a, const auto& b) { return a.*raw < b.*raw; });
    const double a = (*lo).*raw;
    const double span = (*hi).*raw - a;
    for (auto& r : records) r.*norm = span > 0.0 ? (r.*raw - a) / span : 0.0;
    return;
  }
  double mean = 0.0;
  for (const auto& r : records) mean += r.*raw;
  mean /= static_cast<double>(size);
  double ss = 0.0;
  for (const auto& r : records) ss += (r.*raw - mean) * (r.*raw - mean);
  const double sd = size > 1 ? std::sqrt(ss / static_cast<double>(size - 1)) : 0.0;
  for (auto& r : records) r.*norm = sd > 0.0 ? (r.*raw - mean) / sd : 0.0;
}

}  // namespace

void normalize_cohort(std::vector<CohortRecord>& records, Normalization n) {
  if (records.empty()) return;
  for (const auto& r : records)
    if (!std::isfinite(r.esd_um) || !std::isfinite(r.mss_mm))
      throw InvalidArgument("cohort features must be finite");
  scale_feature(records, &CohortRecord::esd_um, &CohortRecord::esd_norm, n);
  scale_feature(records, &CohortRecord::mss_mm, &CohortRecord::mss_norm, n);
}

void CohortSpec::validate() const {
  for (std::size_t s = 0; s < 3; ++s) {
    if (counts[s] == 0) throw InvalidArgument("cohort counts must be positive");
    const auto& st = stats[s];
    if (!(st.esd_sd_um >= 0.0) || !(st.mss_sd_mm >= 0.0) || !std::isfinite(st.esd_mean_um) ||
        !std::isfinite(st.mss_mean_mm))
      throw InvalidArgument("cohort statistics must be finite with non-negative SDs");
  }
}

std::vector<CohortRecord> synth_cohort(const CohortSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<CohortRecord> out;
  for (std::size_t s = 0; s < 3; ++s) {
    std::mt19937_64 rng(derive_seed(seed, "cohort", s));
    std::normal_distribution<double> z(0.0, 1.0);
    const auto& st = spec.stats[s];
    for (std::size_t i = 0; i < spec.counts[s]; ++i) {
      CohortRecord r;
      r.esd_um = st.esd_mean_um + st.esd_sd_um * z(rng);
      r.mss_mm = st.mss_mean_mm + st.mss_sd_mm * z(rng);
      r.subtype = static_cast<Subtype>(s);
      out.push_back(r);
    }
  }
  normalize_cohort(out, spec.normalization);
  return out;
}

std::vector<std::vector<std::size_t>> make_groups(const std::vector<CohortRecord>& records,
                                                  std::size_t k, std::uint64_t seed) {
  if (records.empty()) throw InvalidArgument("cannot group an empty cohort");
  if (k == 0 || k > records.size()) throw InvalidArgument("group count must be in [1, records]");
  std::vector<std::vector<std::size_t>> strata(3);
  for (std::size_t i = 0; i < records.size(); ++i)
    strata[static_cast<std::size_t>(records[i].subtype)].push_back(i);
  for (std::size_t s = 0; s < 3; ++s) {
    std::mt19937_64 rng(derive_seed(seed, "groups", s));
    std::shuffle(strata[s].begin(), strata[s].end(), rng);
  }

  std::vector<std::vector<std::size_t>> groups(k);
  for (const auto& members : strata) {
    const std::size_t base = members.size() / k;
    const std::size_t extra = members.size() % k;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < k; ++g) {
      const std::size_t take = base + (g < extra ? 1 : 0);
      groups[g].insert(groups[g].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                       members.begin() + static_cast<std::ptrdiff_t>(pos + take));
      pos += take;
    }
  }
  // Small strata all put their remainder in the first groups, which can starve the last
  // ones; dealing the strata round-robin keeps every group non-empty and still stratified.
  if (std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); })) {
    for (auto& g : groups) g.clear();
    std::size_t next = 0;
    for (const auto& members : strata)
      for (std::size_t i : members) groups[next++ % k].push_back(i);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct TrainingSet {
  Matrix x;  // rows are records
  std::vector<int> y;  // 1 malignant, 0 benign
};

Vector features_of(const CohortRecord& r, FeatureSet f) {
  if (f == FeatureSet::esd) return Vector::Constant(1, r.esd_norm);
  Vector v(2);
  v << r.esd_norm, r.mss_norm;
  return v;
}

/// Returns a score; positive predicts malignant.
class Model {
 public:
  virtual ~Model() = default;
  virtual double score(const Vector& x) const = 0;
  virtual double threshold() const { return 0.0; }
};

Matrix class_rows(const TrainingSet& t, int cls) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < t.y.size(); ++i)
    if (t.y[i] == cls) idx.push_back(static_cast<Eigen::Index>(i));
  Matrix m(static_cast<Eigen::Index>(idx.size()), t.x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = t.x.row(idx[i]);
  return m;
}

Matrix covariance(const Matrix& rows, const Vector& mean) {
  const Matrix centered = rows.rowwise() - mean.transpose();
  return centered.transpose() * centered;  // unnormalized scatter
}

/// Small ridge keeps degenerate covariances invertible.
Matrix regularize(Matrix s) {
  const double ridge = 1e-9 * std::max(1.0, s.trace() / static_cast<double>(s.rows()));
  s.diagonal().array() += ridge;
  return s;
}

class Lda : public Model {
 public:
  explicit Lda(const TrainingSet& t) {
    const Matrix m1 = class_rows(t, 1), m0 = class_rows(t, 0);
    const Vector mu1 = m1.colwise().mean(), mu0 = m0.colwise().mean();
    const double n = static_cast<double>(t.y.size());
    const Matrix pooled = regularize((covariance(m1, mu1) + covariance(m0, mu0)) / (n - 2.0));
    const Eigen::LDLT<Matrix> solve(pooled);
    w_ = solve.solve(mu1 - mu0);
    b_ = -0.5 * w_.dot(mu1 + mu0) +
         std::log(static_cast<double>(m1.rows()) / static_cast<double>(m0.rows()));
  }
  double score(const Vector& x) const override { return w_.dot(x) + b_; }

 private:
  Vector w_;
  double b_ = 0.0;
};

struct GaussianClass {
  Vector mean;
  Eigen::LDLT<Matrix> solve;
  double log_det = 0.0;
  double log_prior = 0.0;

  GaussianClass(const Matrix& rows, double n_total) {
    mean = rows.colwise().mean();
    const Matrix cov = regularize(covariance(rows, mean) / std::max(1.0, static_cast<double>(rows.rows()) - 1.0));
    solve.compute(cov);
    log_det = solve.vectorD().array().log().sum();
    log_prior = std::log(static_cast<double>(rows.rows()) / n_total);
  }
  double log_density(const Vector& x) const {
    const Vector d = x - mean;
    return -0.5 * d.dot(solve.solve(d)) - 0.5 * log_det + log_prior;
  }
};

class Qda : public Model {
 public:
  explicit Qda(const TrainingSet& t)
      : c1_(class_rows(t, 1), static_cast<double>(t.y.size())),
        c0_(class_rows(t, 0), static_cast<double>(t.y.size())) {}
  double score(const Vector& x) const override { return c1_.log_density(x) - c0_.log_density(x); }

 private:
  GaussianClass c1_, c0_;
};

class NaiveBayes : public Model {
 public:
  explicit NaiveBayes(const TrainingSet& t) {
    for (int cls : {0, 1}) {
      const Matrix rows = class_rows(t, cls);
      const Vector mu = rows.colwise().mean();
      Vector var = ((rows.rowwise() - mu.transpose()).array().square().colwise().sum() /
                    std::max(1.0, static_cast<double>(rows.rows()) - 1.0))
                       .transpose();
      var = var.array().max(1e-12);
      mean_[cls] = mu;
      var_[cls] = var;
      log_prior_[cls] = std::log(static_cast<double>(rows.rows()) / static_cast<double>(t.y.size()));
    }
  }
  double score(const Vector& x) const override { return log_density(x, 1) - log_density(x, 0); }

 private:
  double log_density(const Vector& x, int cls) const {
    const auto d = (x - mean_[cls]).array();
    return log_prior_[cls] - 0.5 * (d.square() / var_[cls].array() + var_[cls].array().log()).sum();
  }
  Vector mean_[2], var_[2];
  double log_prior_[2] = {0.0, 0.0};
};

class Knn : public Model {
 public:
  Knn(const TrainingSet& t, std::size_t k) : t_(t), k_(std::min(k, t.y.size())) {}
  // Fraction of malignant neighbours; ties in distance resolve to the lower training index.
  double score(const Vector& x) const override {
    std::vector<std::pair<double, std::size_t>> d(t_.y.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = {(t_.x.row(static_cast<Eigen::Index>(i)).transpose() - x).squaredNorm(), i};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_), d.end());
    double votes = 0.0;
    for (std::size_t i = 0; i < k_; ++i) votes += t_.y[d[i].second];
    return votes / static_cast<double>(k_);
  }
  double threshold() const override { return 0.5; }

 private:
  TrainingSet t_;
  std::size_t k_;
};

Matrix with_bias(const Matrix& x) {
  Matrix a(x.rows(), x.cols() + 1);
  a << x, Vector::Ones(x.rows());
  return a;
}

/// Newton-Raphson (IRLS) with a tiny ridge so separable folds stay finite.
class Logistic : public Model {
 public:
  explicit Logistic(const TrainingSet& t) {
    const Matrix a = with_bias(t.x);
    Vector y(static_cast<Eigen::Index>(t.y.size()));
    for (std::size_t i = 0; i < t.y.size(); ++i) y[static_cast<Eigen::Index>(i)] = t.y[i];
    constexpr double kRidge = 1e-4;
    w_ = Vector::Zero(a.cols());
    for (int iter = 0; iter < 100; ++iter) {
      const Vector p = (1.0 + (-(a * w_).array()).exp()).inverse().matrix();
      const Vector wts = (p.array() * (1.0 - p.array())).max(1e-12).matrix();
      Matrix h = a.transpose() * wts.asDiagonal() * a;
      h.diagonal().array() += kRidge;
      const Vector g = a.transpose() * (y - p) - kRidge * w_;
      const Vector step = h.ldlt().solve(g);
      w_ += step;
      if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
    }
  }
  double score(const Vector& x) const override {
    Vector xb(x.size() + 1);
    xb << x, 1.0;
    return w_.dot(xb);
  }

 private:
  Vector w_;
};

/// L1-loss soft-margin SVM, dual coordinate descent over records in a fixed order.
class LinearSvm : public Model {
 public:
  LinearSvm(const TrainingSet& t, double c) {
    const Matrix a = with_bias(t.x);
    const std::size_t n = t.y.size();
    std::vector<double> alpha(n, 0.0), yv(n), qii(n);
    for (std::size_t i = 0; i < n; ++i) {
      yv[i] = t.y[i] == 1 ? 1.0 : -1.0;
      qii[i] = a.row(static_cast<Eigen::Index>(i)).squaredNorm();
    }
    w_ = Vector::Zero(a.cols());
    for (int epoch = 0; epoch < 2000; ++epoch) {
      double max_pg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = a.row(static_cast<Eigen::Index>(i));
        const double g = yv[i] * row.dot(w_) - 1.0;
        double pg = g;
        if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
        else if (alpha[i] >= c) pg = std::max(g, 0.0);
        max_pg = std::max(max_pg, std::fabs(pg));
        if (pg == 0.0 || qii[i] <= 0.0) continue;
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qii[i], 0.0, c);
        w_ += ((alpha[i] - old) * yv[i]) * row.transpose();
      }
      if (max_pg < 1e-8) break;
    }
  }
  double score(const Vector& x) const override {
    Vector xb(x.size() + 1);
    xb << x, 1.0;
    return w_.dot(xb);
  }

 private:
  Vector w_;
};

std::unique_ptr<Model> train(ClassifierKind kind, const TrainingSet& t, const ClassifierOptions& o) {
  switch (kind) {
    case ClassifierKind::lda_linear: return std::make_unique<Lda>(t);
    case ClassifierKind::lda_quadratic: return std::make_unique<Qda>(t);
    case ClassifierKind::knn: return std::make_unique<Knn>(t, o.knn_k);
    case ClassifierKind::logistic: return std::make_unique<Logistic>(t);
    case ClassifierKind::naive_bayes: return std::make_unique<NaiveBayes>(t);
    case ClassifierKind::svm_linear: return std::make_unique<LinearSvm>(t, o.svm_c);
  }
  throw InvalidArgument("unknown classifier");
}

}  // namespace

CvResult run_cv(const std::vector<CohortRecord>& records, ClassifierKind kind,
                const std::vector<std::vector<std::size_t>>& groups, FeatureSet features,
                const ClassifierOptions& opts) {
  if (opts.knn_k == 0) throw InvalidArgument("knn k must be positive");
  if (!(opts.svm_c > 0.0)) throw InvalidArgument("svm C must be positive");
  std::vector<int> fold_of(records.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i : groups[g]) {
      if (i >= records.size() || fold_of[i] != -1)
        throw InvalidArgument("groups must partition the cohort");
      fold_of[i] = static_cast<int>(g);
    }
  if (std::find(fold_of.begin(), fold_of.end(), -1) != fold_of.end())
    throw InvalidArgument("groups must partition the cohort");

  CvResult out;
  out.scores.assign(records.size(), 0.0);
  out.predicted_malignant.assign(records.size(), false);
  std::vector<std::vector<std::pair<double, bool>>> fold_out(groups.size());
  // Validate folds up front so the error does not depend on scheduling.
  for (std::size_t g = 0; g < groups.size(); ++g) {
    bool has[2] = {false, false};
    for (std::size_t i = 0; i < records.size(); ++i)
      if (fold_of[i] != static_cast<int>(g)) has[records[i].label() == Label::malignant] = true;
    if (!has[0] || !has[1])
      throw InvalidArgument("training fold " + std::to_string(g + 1) + " holds a single class");
  }
  parallel_for(groups.size(), [&](std::size_t g) {
    TrainingSet t;
    const std::size_t n_train = records.size() - groups[g].size();
    const Eigen::Index dim = features == FeatureSet::esd ? 1 : 2;
    t.x.resize(static_cast<Eigen::Index>(n_train), dim);
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (fold_of[i] == static_cast<int>(g)) continue;
      t.x.row(row++) = features_of(records[i], features).transpose();
      t.y.push_back(records[i].label() == Label::malignant ? 1 : 0);
    }
    const auto model = train(kind, t, opts);
    for (std::size_t i : groups[g]) {
      const double s = model->score(features_of(records[i], features));
      fold_out[g].push_back({s, s > model->threshold()});
    }
  });
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.fold_sizes.push_back(groups[g].size());
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      const std::size_t i = groups[g][k];
      out.scores[i] = fold_out[g][k].first;
      const bool pred = fold_out[g][k].second;
      out.predicted_malignant[i] = pred;
      const bool truth = records[i].label() == Label::malignant;
      if (truth && pred) ++out.counts.tp;
      else if (truth) ++out.counts.fn;
      else if (pred) ++out.counts.fp;
      else ++out.counts.tn;
    }
  }
  return out;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  MetricsReport m;
  const auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      m.undefined.emplace_back(name);
      return 0.0;
    }
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(c.tp, c.tp + c.fn, "sensitivity");
  m.specificity = ratio(c.tn, c.tn + c.fp, "specificity");
  m.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy");
  m.ppv = ratio(c.tp, c.tp + c.fp, "ppv");
  m.npv = ratio(c.tn, c.tn + c.fn, "npv");
  m.sum5 = m.sensitivity + m.specificity + m.accuracy + m.ppv + m.npv;
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) {
    m.undefined.emplace_back("mcc");
  } else {
    m.mcc = (tp * tn - fp * fn) / std::sqrt(den);
  }
  return m;
}

double auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("scores and labels differ in size");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

AucInterval bootstrap_auc(const std::vector<double>& scores, const std::vector<bool>& positive,
                          std::size_t b, std::uint64_t seed) {
  if (scores.size() != positive.size()) throw InvalidArgument("scores and labels differ in size");
  if (b == 0) throw InvalidArgument("bootstrap count must be positive");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (positive[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw InvalidArgument("bootstrap AUC needs both classes");

  std::vector<double> aucs(b);
  for (std::size_t r = 0; r < b; ++r) {
    std::mt19937_64 rng(derive_seed(seed, "bootstrap", r));
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1), pick_neg(0, neg.size() - 1);
    std::vector<double> s;
    std::vector<bool> y;
    s.reserve(scores.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
      s.push_back(scores[pos[pick_pos(rng)]]);
      y.push_back(true);
    }
    for (std::size_t i = 0; i < neg.size(); ++i) {
      s.push_back(scores[neg[pick_neg(rng)]]);
      y.push_back(false);
    }
    aucs[r] = auc(s, y);
  }
  AucInterval out;
  out.mean_auc = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(b);
  std::sort(aucs.begin(), aucs.end());
  out.ci_low = percentile(aucs, 0.025);
  out.ci_high = percentile(aucs, 0.975);
  return out;
}

double fisher_exact(const std::array<std::array<std::size_t, 2>, 2>& t) {
  const auto lf = [](double x) { return std::lgamma(x + 1.0); };
  const double a = static_cast<double>(t[0][0]), b = static_cast<double>(t[0][1]);
  const double c = static_cast<double>(t[1][0]), d = static_cast<double>(t[1][1]);
  const double r1 = a + b, r2 = c + d, c1 = a + c, n = a + b + c + d;
  const double fixed = lf(r1) + lf(r2) + lf(c1) + lf(n - c1) - lf(n);
  const auto log_p = [&](double x) {
    return fixed - lf(x) - lf(r1 - x) - lf(c1 - x) - lf(r2 - c1 + x);
  };
  const double observed = log_p(a);
  const double lo = std::max(0.0, c1 - r2), hi = std::min(r1, c1);
  double p = 0.0;
  for (double x = lo; x <= hi; x += 1.0) {
    const double lp = log_p(x);
    // Relative slack absorbs lgamma rounding between tables of equal probability.
    if (lp <= observed + 1e-7) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

ClassificationReport evaluate_classifiers(const std::vector<CohortRecord>& records,
                                          const std::vector<std::vector<std::size_t>>& groups,
                                          FeatureSet features, std::size_t bootstraps,
                                          std::uint64_t seed, const ClassifierOptions& opts) {
  ClassificationReport rep;
  rep.features = features;
  std::vector<CvResult> runs;
  for (ClassifierKind k : kAllClassifiers) {
    runs.push_back(run_cv(records, k, groups, features, opts));
    rep.classifiers.push_back({k, runs.back().counts, compute_metrics(runs.back().counts)});
  }
  double total = 0.0;
  for (std::size_t i = 0; i < rep.classifiers.size(); ++i) {
    total += rep.classifiers[i].metrics.sum5;
    if (rep.classifiers[i].metrics.sum5 > rep.classifiers[rep.best].metrics.sum5) rep.best = i;
  }
  const double n = static_cast<double>(rep.classifiers.size());
  rep.sum5_mean = total / n;
  double ss = 0.0;
  for (const auto& c : rep.classifiers) ss += (c.metrics.sum5 - rep.sum5_mean) * (c.metrics.sum5 - rep.sum5_mean);
  rep.sum5_sd = std::sqrt(ss / (n - 1.0));
  std::vector<bool> positive(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) positive[i] = records[i].label() == Label::malignant;
  rep.best_auc = bootstrap_auc(runs[rep.best].scores, positive, bootstraps, seed);
  rep.fold_sizes = runs[rep.best].fold_sizes;
  return rep;
}

}  // namespace quskit
