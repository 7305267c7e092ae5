#pragma once

// Benign/malignant classification harness: stratified grouping, cross-validated
// classifiers, confusion metrics, bootstrap AUC, Fisher's exact test and a
// synthetic cohort generator. Malignant is the positive class throughout.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace quskit {

enum class Subtype { malignant, fibroadenoma, inflammatory };
enum class Label { benign, malignant };

std::string_view to_string(Subtype s);
std::string_view to_string(Label l);
Subtype subtype_from_string(std::string_view name);  // throws InvalidArgument
Label label_of(Subtype s);

struct CohortRecord {
  double esd_um = 0.0;
  double mss_mm = 0.0;
  double esd_norm = 0.0;  // filled by normalize_cohort
  double mss_norm = 0.0;
  Subtype subtype = Subtype::malignant;

  Label label() const { return label_of(subtype); }
};

enum class Normalization { min_max, z_score };

std::string_view to_string(Normalization n);
Normalization normalization_from_string(std::string_view name);

/// Cohort-wide statistics, so test folds leak into the scaling (optimistic).
void normalize_cohort(std::vector<CohortRecord>& records, Normalization n = Normalization::min_max);

struct SubtypeStats {
  double esd_mean_um = 0.0;
  double esd_sd_um = 0.0;
  double mss_mean_mm = 0.0;
  double mss_sd_mm = 0.0;
};

/// Indexed by Subtype.
struct CohortSpec {
  std::array<SubtypeStats, 3> stats{{{123.05, 8.85, 0.79, 0.04},
                                     {98.71, 9.55, 0.75, 0.03},
                                     {75.72, 4.09, 0.73, 0.04}}};
  std::array<std::size_t, 3> counts{56, 79, 24};
  Normalization normalization = Normalization::min_max;

  void validate() const;
};

/// Gaussian draws per subtype, records ordered by subtype, then normalized.
std::vector<CohortRecord> synth_cohort(const CohortSpec& spec, std::uint64_t seed);

/// k disjoint groups stratified by subtype. Each subtype is shuffled and dealt in
/// contiguous runs; its remainder goes to the lowest-numbered groups.
std::vector<std::vector<std::size_t>> make_groups(const std::vector<CohortRecord>& records,
                                                  std::size_t k, std::uint64_t seed);

enum class ClassifierKind { lda_linear, lda_quadratic, knn, logistic, naive_bayes, svm_linear };

inline constexpr std::array<ClassifierKind, 6> kAllClassifiers = {
    ClassifierKind::lda_linear, ClassifierKind::lda_quadratic, ClassifierKind::knn,
    ClassifierKind::logistic,   ClassifierKind::naive_bayes,   ClassifierKind::svm_linear};

std::string_view to_string(ClassifierKind k);
ClassifierKind classifier_from_string(std::string_view name);

enum class FeatureSet { esd, esd_mss };

std::string_view to_string(FeatureSet f);
FeatureSet feature_set_from_string(std::string_view name);

struct ClassifierOptions {
  std::size_t knn_k = 5;
  double svm_c = 1.0;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct CvResult {
  ConfusionCounts counts;
  std::vector<double> scores;  // per record; larger means more malignant
  std::vector<bool> predicted_malignant;
  std::vector<std::size_t> fold_sizes;
};

/// Trains on k-1 groups and tests on the held-out one, for every group, on normalized features.
/// Throws InvalidArgument when a training fold holds a single class or groups do not
/// partition the cohort.
CvResult run_cv(const std::vector<CohortRecord>& records, ClassifierKind kind,
                const std::vector<std::vector<std::size_t>>& groups,
                FeatureSet features = FeatureSet::esd_mss, const ClassifierOptions& opts = {});

struct MetricsReport {
  double sensitivity = 0.0;  // percent
  double specificity = 0.0;
  double accuracy = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  double sum5 = 0.0;
  double mcc = 0.0;
  std::vector<std::string> undefined;  // metrics whose denominator was zero, reported as 0
};

MetricsReport compute_metrics(const ConfusionCounts& c);

struct AucInterval {
  double mean_auc = 0.0;
  double ci_low = 0.0;   // 2.5th percentile
  double ci_high = 0.0;  // 97.5th percentile
};

/// Mann-Whitney AUC with midranks for ties.
double auc(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Resamples positives and negatives separately with replacement.
AucInterval bootstrap_auc(const std::vector<double>& scores, const std::vector<bool>& positive,
                          std::size_t b, std::uint64_t seed);

/// Two-sided: sums every table with the observed margins that is no more likely than the observed one.
double fisher_exact(const std::array<std::array<std::size_t, 2>, 2>& table);

struct ClassifierSummary {
  ClassifierKind kind = ClassifierKind::lda_linear;
  ConfusionCounts counts;
  MetricsReport metrics;
};

struct ClassificationReport {
  FeatureSet features = FeatureSet::esd_mss;
  std::vector<ClassifierSummary> classifiers;  // in kAllClassifiers order
  std::size_t best = 0;                        // index of the max Sum5, first on ties
  double sum5_mean = 0.0;
  double sum5_sd = 0.0;
  AucInterval best_auc;
  std::vector<std::size_t> fold_sizes;
};

/// Runs every classifier over the same groups and bootstraps the AUC of the best one.
ClassificationReport evaluate_classifiers(const std::vector<CohortRecord>& records,
                                          const std::vector<std::vector<std::size_t>>& groups,
                                          FeatureSet features, std::size_t bootstraps,
                                          std::uint64_t seed, const ClassifierOptions& opts = {});

}  // namespace quskit
