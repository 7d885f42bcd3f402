#pragma once

// Multi-subject transfer strategies on top of the alignment:
//
//   SSF       one spatial filter from the union of target and aligned
//             source covariances; LDA on target training features.
//   COMBINE   per-source filters generate extra target feature rows
//             (M(K+1) in total) for the LDA; test time reuses the SSF
//             filter.
//   ENSEMBLE  one classifier per source filter plus a target-only
//             member; majority vote, ties resolved by the target
//             member.
//   COMPOSITE convex combination of target and source class-mean
//             covariances (no alignment), lambda weighting the sources.
//   BASELINE  plain CSP + LDA on the target alone.
//
// With zero sources SSF, COMBINE and ENSEMBLE all reduce exactly to
// the baseline. Binary problems use a single LDA task (positive class
// = larger label); more classes use one-vs-rest tasks with prediction
// by maximum posterior.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rtcsp/alignment.hpp"
#include "rtcsp/csp.hpp"
#include "rtcsp/errors.hpp"
#include "rtcsp/lda.hpp"
#include "rtcsp/signal.hpp"
#include "rtcsp/spd.hpp"

namespace rtcsp {

/// One subject's labeled trials with their covariance representation.
struct SubjectData {
    std::string subject_id;
    std::vector<Trial> trials;
    std::vector<Label> labels;
    std::vector<SpdMatrix> covariances;

    std::vector<Label> alphabet() const { return distinct_labels(labels); }
};

inline SubjectData make_subject_data(std::string subject_id, std::vector<Trial> trials,
                                     std::vector<Label> labels, CovarianceEstimator estimator) {
    if (trials.size() != labels.size())
        throw InvalidInput("make_subject_data: trial/label count mismatch for subject "
                           + subject_id);
    if (trials.empty())
        throw InvalidInput("make_subject_data: no trials for subject " + subject_id);
    if (distinct_labels(labels).size() < 2)
        throw InvalidInput("make_subject_data: subject " + subject_id
                           + " has fewer than 2 classes");
    SubjectData s;
    s.subject_id = std::move(subject_id);
    s.labels = std::move(labels);
    s.covariances.reserve(trials.size());
    for (const Trial& t : trials) s.covariances.push_back(estimate_covariance(t, estimator));
    s.trials = std::move(trials);
    return s;
}

enum class Strategy { CspBaseline, Ssf, Combine, Ensemble, CompositeCsp };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::CspBaseline: return "csp";
        case Strategy::Ssf: return "rtcsp_ssf";
        case Strategy::Combine: return "rtcsp_combine";
        case Strategy::Ensemble: return "rtcsp_ensemble";
        case Strategy::CompositeCsp: return "composite_csp";
    }
    return "?";
}

struct TaskHead {
    Label positive_class;
    SpatialFilter filter;
    LdaModel lda;
};

struct MemberModel {
    std::vector<TaskHead> tasks;
};

struct TransferModel {
    Strategy strategy = Strategy::CspBaseline;
    std::vector<Label> class_alphabet; // ascending
    int n_pairs = 0;
    std::vector<MemberModel> members;  // ENSEMBLE: K+1 with the target member last; else 1
    /// Features computed from trace-normalized covariances instead of
    /// raw trials (pooled-LDA variant); applies at fit and predict time.
    bool cov_features = false;
};

struct TransferOptions {
    LdaConfig lda{};
    AlignOptions align{};
    /// SSF variant: train the LDA on pooled target + aligned-source
    /// covariance features instead of target trial features.
    bool pooled_lda = false;
};

namespace detail {

/// Binary problems get one task for the larger label; multiclass gets
/// one task per class, ascending.
inline std::vector<Label> task_positive_classes(const std::vector<Label>& alphabet) {
    if (alphabet.size() < 2)
        throw InvalidInput("transfer: need at least 2 classes");
    if (alphabet.size() == 2) return {alphabet[1]};
    return alphabet;
}

inline std::vector<Label> binarize(const std::vector<Label>& labels, Label positive) {
    std::vector<Label> out;
    out.reserve(labels.size());
    for (Label l : labels) out.push_back(l == positive ? +1 : -1);
    return out;
}

/// CSP filter for one one-vs-rest task: positive class mean against
/// the pooled mean of every other trial.
inline SpatialFilter task_filter(const std::vector<SpdMatrix>& covs,
                                 const std::vector<Label>& labels, Label positive,
                                 int n_pairs) {
    Eigen::MatrixXd pos_acc, neg_acc;
    int n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        Eigen::MatrixXd& acc = labels[i] == positive ? pos_acc : neg_acc;
        int& n = labels[i] == positive ? n_pos : n_neg;
        if (n == 0)
            acc = covs[i].mat();
        else
            acc += covs[i].mat();
        ++n;
    }
    if (n_pos == 0 || n_neg == 0)
        throw InvalidInput("task_filter: class " + std::to_string(positive)
                           + " needs trials on both sides");
    return csp_filters(SpdMatrix(neg_acc / n_neg), SpdMatrix(pos_acc / n_pos), n_pairs);
}

inline Eigen::MatrixXd feature_rows(const SpatialFilter& f, const std::vector<Trial>& trials) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(trials.size()), f.W.cols());
    for (std::size_t i = 0; i < trials.size(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) =
            log_variance_features(f, trials[i]).values.transpose();
    return rows;
}

inline Eigen::MatrixXd feature_rows_cov(const SpatialFilter& f,
                                        const std::vector<SpdMatrix>& covs) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(covs.size()), f.W.cols());
    for (std::size_t i = 0; i < covs.size(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) =
            log_variance_features(f, covs[i].mat()).values.transpose();
    return rows;
}

struct AlignedPool {
    std::vector<SubjectAlignment> per_source; // aligned covariances, source order
    std::vector<SpdMatrix> covs;              // target covs then aligned source covs
    std::vector<Label> labels;
};

inline AlignedPool build_aligned_pool(const std::vector<SubjectData>& sources,
                                      const SubjectData& target, const AlignOptions& opt) {
    AlignedPool pool;
    pool.covs = target.covariances;
    pool.labels = target.labels;
    pool.per_source.reserve(sources.size());
    for (const SubjectData& src : sources) {
        SubjectAlignment sa = align_subject(src.covariances, src.labels, target.covariances,
                                            target.labels, opt);
        pool.covs.insert(pool.covs.end(), sa.covs.begin(), sa.covs.end());
        pool.labels.insert(pool.labels.end(), sa.labels.begin(), sa.labels.end());
        pool.per_source.push_back(std::move(sa));
    }
    return pool;
}

} // namespace detail

/// RTCSP single spatial filter: CSP on the union of target and aligned
/// source covariances; the LDA sees only target training features.
inline TransferModel rtcsp_ssf(const std::vector<SubjectData>& sources,
                               const SubjectData& target, int n_pairs,
                               const TransferOptions& opt = {}) {
    const detail::AlignedPool pool = detail::build_aligned_pool(sources, target, opt.align);

    TransferModel model;
    model.strategy = Strategy::Ssf;
    model.class_alphabet = target.alphabet();
    model.n_pairs = n_pairs;
    model.cov_features = opt.pooled_lda;

    MemberModel member;
    for (Label positive : detail::task_positive_classes(model.class_alphabet)) {
        TaskHead head{positive,
                      detail::task_filter(pool.covs, pool.labels, positive, n_pairs),
                      LdaModel{}};
        if (opt.pooled_lda) {
            head.lda = lda_fit(detail::feature_rows_cov(head.filter, pool.covs),
                               detail::binarize(pool.labels, positive), opt.lda);
        } else {
            head.lda = lda_fit(detail::feature_rows(head.filter, target.trials),
                               detail::binarize(target.labels, positive), opt.lda);
        }
        member.tasks.push_back(std::move(head));
    }
    model.members.push_back(std::move(member));
    return model;
}

/// Standard CSP + LDA on the target alone.
inline TransferModel csp_baseline(const SubjectData& target, int n_pairs,
                                  const TransferOptions& opt = {}) {
    TransferOptions base = opt;
    base.pooled_lda = false;
    TransferModel model = rtcsp_ssf({}, target, n_pairs, base);
    model.strategy = Strategy::CspBaseline;
    return model;
}

/// RTCSP-Combine: each aligned source yields its own filter, which
/// generates M extra target feature rows; the LDA trains on all
/// M(K+1) rows. Test time uses the SSF filter.
inline TransferModel rtcsp_combine(const std::vector<SubjectData>& sources,
                                   const SubjectData& target, int n_pairs,
                                   const TransferOptions& opt = {}) {
    const detail::AlignedPool pool = detail::build_aligned_pool(sources, target, opt.align);

    TransferModel model;
    model.strategy = Strategy::Combine;
    model.class_alphabet = target.alphabet();
    model.n_pairs = n_pairs;

    MemberModel member;
    for (Label positive : detail::task_positive_classes(model.class_alphabet)) {
        TaskHead head{positive,
                      detail::task_filter(pool.covs, pool.labels, positive, n_pairs),
                      LdaModel{}};

        const std::vector<Label> y_t = detail::binarize(target.labels, positive);
        std::vector<Eigen::MatrixXd> blocks;
        std::vector<Label> stacked_labels;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            // W_{S_i} from the aligned source's own labels; a source
            // without both sides of this task contributes no rows
            SpatialFilter w_si;
            try {
                w_si = detail::task_filter(pool.per_source[i].covs, sources[i].labels,
                                           positive, n_pairs);
            } catch (const InvalidInput&) {
                continue;
            }
            blocks.push_back(detail::feature_rows(w_si, target.trials));
            stacked_labels.insert(stacked_labels.end(), y_t.begin(), y_t.end());
        }
        blocks.push_back(detail::feature_rows(
            detail::task_filter(target.covariances, target.labels, positive, n_pairs),
            target.trials));
        stacked_labels.insert(stacked_labels.end(), y_t.begin(), y_t.end());

        Eigen::MatrixXd stacked(static_cast<Eigen::Index>(stacked_labels.size()),
                                2 * n_pairs);
        Eigen::Index row = 0;
        for (const Eigen::MatrixXd& b : blocks) {
            stacked.middleRows(row, b.rows()) = b;
            row += b.rows();
        }
        head.lda = lda_fit(stacked, stacked_labels, opt.lda);
        member.tasks.push_back(std::move(head));
    }
    model.members.push_back(std::move(member));
    return model;
}

/// RTCSP-Ensemble: one member per source (filter from the aligned
/// source, LDA on the target features it generates) plus the target
/// member, appended last.
inline TransferModel rtcsp_ensemble(const std::vector<SubjectData>& sources,
                                    const SubjectData& target, int n_pairs,
                                    const TransferOptions& opt = {}) {
    TransferModel model;
    model.strategy = Strategy::Ensemble;
    model.class_alphabet = target.alphabet();
    model.n_pairs = n_pairs;

    const std::vector<Label> positives =
        detail::task_positive_classes(model.class_alphabet);

    auto build_member = [&](const std::vector<SpdMatrix>& covs,
                            const std::vector<Label>& labels) {
        MemberModel member;
        for (Label positive : positives) {
            SpatialFilter w;
            try {
                w = detail::task_filter(covs, labels, positive, n_pairs);
            } catch (const InvalidInput&) {
                continue; // class missing on one side; member skips the task
            }
            TaskHead head{positive, std::move(w), LdaModel{}};
            head.lda = lda_fit(detail::feature_rows(head.filter, target.trials),
                               detail::binarize(target.labels, positive), opt.lda);
            member.tasks.push_back(std::move(head));
        }
        return member;
    };

    for (const SubjectData& src : sources) {
        SubjectAlignment sa = align_subject(src.covariances, src.labels, target.covariances,
                                            target.labels, opt.align);
        MemberModel member = build_member(sa.covs, src.labels);
        if (!member.tasks.empty()) model.members.push_back(std::move(member));
    }
    model.members.push_back(build_member(target.covariances, target.labels));
    if (model.members.back().tasks.empty())
        throw InvalidInput("rtcsp_ensemble: target member has no usable task");
    return model;
}

/// Composite CSP baseline: per class-side, the convex combination
/// (1 - lambda) target mean + lambda * (equal-weight source average)
/// of class-mean covariances; no alignment involved.
inline TransferModel composite_csp(const std::vector<SubjectData>& sources,
                                   const SubjectData& target, double lambda, int n_pairs,
                                   const TransferOptions& opt = {}) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw InvalidInput("composite_csp: lambda must lie in [0, 1]");

    auto side_mean = [](const SubjectData& s, Label positive,
                        bool want_positive) -> std::optional<Eigen::MatrixXd> {
        Eigen::MatrixXd acc;
        int n = 0;
        for (std::size_t i = 0; i < s.covariances.size(); ++i) {
            if ((s.labels[i] == positive) != want_positive) continue;
            if (n == 0)
                acc = s.covariances[i].mat();
            else
                acc += s.covariances[i].mat();
            ++n;
        }
        if (n == 0) return std::nullopt;
        return acc / n;
    };

    auto composite_mean = [&](Label positive, bool want_positive) {
        const auto tgt = side_mean(target, positive, want_positive);
        if (!tgt)
            throw InvalidInput("composite_csp: target lacks a class side");
        Eigen::MatrixXd src_acc;
        int k = 0;
        for (const SubjectData& s : sources) {
            const auto m = side_mean(s, positive, want_positive);
            if (!m) continue;
            if (k == 0)
                src_acc = *m;
            else
                src_acc += *m;
            ++k;
        }
        if (k == 0) return SpdMatrix(*tgt); // no source carries this side
        return SpdMatrix((1.0 - lambda) * *tgt + lambda * (src_acc / k));
    };

    TransferModel model;
    model.strategy = Strategy::CompositeCsp;
    model.class_alphabet = target.alphabet();
    model.n_pairs = n_pairs;

    MemberModel member;
    for (Label positive : detail::task_positive_classes(model.class_alphabet)) {
        const SpdMatrix pos = composite_mean(positive, true);
        const SpdMatrix neg = composite_mean(positive, false);
        TaskHead head{positive, csp_filters(neg, pos, n_pairs), LdaModel{}};
        head.lda = lda_fit(detail::feature_rows(head.filter, target.trials),
                           detail::binarize(target.labels, positive), opt.lda);
        member.tasks.push_back(std::move(head));
    }
    model.members.push_back(std::move(member));
    return model;
}

struct Prediction {
    Label label = 0;
    /// One entry per class in class_alphabet order: binary and
    /// one-vs-rest posteriors, or vote fractions for the ensemble.
    std::vector<double> scores;
};

namespace detail {

inline Eigen::VectorXd task_feature(const TransferModel& model, const TaskHead& head,
                                    const Trial& trial,
                                    const std::optional<SpdMatrix>& trial_cov) {
    if (model.cov_features)
        return log_variance_features(head.filter, trial_cov->mat()).values;
    return log_variance_features(head.filter, trial).values;
}

inline std::pair<Label, std::vector<double>>
member_predict(const TransferModel& model, const MemberModel& member, const Trial& trial,
               const std::optional<SpdMatrix>& trial_cov) {
    const auto& alphabet = model.class_alphabet;
    std::vector<double> scores(alphabet.size(), 0.0);
    if (alphabet.size() == 2) {
        const TaskHead& head = member.tasks.front();
        const double p = lda_posterior(head.lda, task_feature(model, head, trial, trial_cov));
        scores[0] = 1.0 - p;
        scores[1] = p;
        return {p > 0.5 ? alphabet[1] : alphabet[0], scores};
    }
    Label best_label = alphabet[0];
    double best = -1.0;
    for (const TaskHead& head : member.tasks) {
        const double p = lda_posterior(head.lda, task_feature(model, head, trial, trial_cov));
        const auto it = std::find(alphabet.begin(), alphabet.end(), head.positive_class);
        scores[static_cast<std::size_t>(it - alphabet.begin())] = p;
        if (p > best) {
            best = p;
            best_label = head.positive_class;
        }
    }
    return {best_label, scores};
}

} // namespace detail

/// Classifies one unseen trial. Ensemble models take a majority vote
/// over members with ties resolved by the target member (last).
inline Prediction predict(const TransferModel& model, const Trial& trial) {
    if (model.members.empty() || model.members.front().tasks.empty())
        throw InvalidInput("predict: model has no trained members");
    const int channels = model.members.front().tasks.front().filter.channels();
    if (trial.channels() != channels)
        throw InvalidInput("predict: trial has " + std::to_string(trial.channels())
                           + " channels, model expects " + std::to_string(channels));

    std::optional<SpdMatrix> trial_cov;
    if (model.cov_features) trial_cov = trial_covariance(trial);

    Prediction out;
    if (model.strategy != Strategy::Ensemble) {
        auto [label, scores] =
            detail::member_predict(model, model.members.front(), trial, trial_cov);
        out.label = label;
        out.scores = std::move(scores);
        return out;
    }

    std::vector<Label> votes;
    votes.reserve(model.members.size());
    for (const MemberModel& member : model.members)
        votes.push_back(detail::member_predict(model, member, trial, trial_cov).first);
    out.label = majority_vote(votes, votes.back());
    out.scores.assign(model.class_alphabet.size(), 0.0);
    for (Label v : votes) {
        const auto it =
            std::find(model.class_alphabet.begin(), model.class_alphabet.end(), v);
        out.scores[static_cast<std::size_t>(it - model.class_alphabet.begin())] +=
            1.0 / votes.size();
    }
    return out;
}

} // namespace rtcsp
