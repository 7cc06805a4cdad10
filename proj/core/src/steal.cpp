#include "fpsim/steal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fpsim/errors.hpp"

namespace fpsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// stand-in for an infinite z-score when every sample agrees; clipped away
constexpr double kHugeZ = 1e30;

}  // namespace

std::vector<LeakedText> collect_leaked_texts(const LanguageModel& model,
                                             const std::vector<TokenId>& common_words,
                                             int count, int gen_len, std::uint64_t seed) {
    if (common_words.empty()) throw ConfigError("collect_leaked_texts: no prompt words");
    if (count < 1 || gen_len < 1) throw ConfigError("collect_leaked_texts: bad count/gen_len");
    Rng rng(seed);
    std::vector<LeakedText> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        LeakedText leaked;
        leaked.prompt = {common_words[static_cast<std::size_t>(i) % common_words.size()]};
        GenerationTrace trace = sample_decode(model, leaked.prompt, gen_len, rng.next_u64());
        leaked.text = std::move(trace.emitted);
        out.push_back(std::move(leaked));
    }
    return out;
}

std::vector<std::optional<double>> steal_statistic_row(const LanguageModel& model,
                                                       const LanguageModel& calib,
                                                       std::span<const TokenId> s_context,
                                                       TokenId t1, double p_thresh) {
    if (model.vocab().size() != calib.vocab().size()) {
        throw ContractError("steal_statistic: models must share a vocabulary");
    }
    TokenSeq ctx{model.vocab().bos()};
    ctx.insert(ctx.end(), s_context.begin(), s_context.end());
    ctx.push_back(t1);
    NextTokenDist pm = model.next(ctx);
    NextTokenDist pc = calib.next(ctx);

    std::vector<std::optional<double>> out(pm.size());
    for (std::size_t t2 = 0; t2 < pm.size(); ++t2) {
        if (pm.probs[t2] <= p_thresh) continue;  // sparsified
        out[t2] = std::log(pm.probs[t2] / std::max(pc.probs[t2], kProbFloor));
    }
    return out;
}

std::optional<double> steal_statistic(const LanguageModel& model, const LanguageModel& calib,
                                      std::span<const TokenId> s_context, TokenId t1, TokenId t2,
                                      double p_thresh) {
    return steal_statistic_row(model, calib, s_context, t1, p_thresh)[static_cast<std::size_t>(t2)];
}

bool StealReport::covers(TokenId t1) const {
    return std::find(t1_tokens.begin(), t1_tokens.end(), t1) != t1_tokens.end();
}

double StealReport::score(TokenId t1, TokenId t2) const {
    auto it = std::find(t1_tokens.begin(), t1_tokens.end(), t1);
    if (it == t1_tokens.end()) return kNaN;
    return g[static_cast<std::size_t>(it - t1_tokens.begin())][static_cast<std::size_t>(t2)];
}

namespace {

// clip both tails at the q / (1-q) quantiles, then divide by the largest
// clipped magnitude so values land in [-1, 1] with the origin fixed. Signs
// must survive normalization because the quadrant test below reads them.
// The +-kHugeZ sentinels stand for infinite z-scores; they are excluded
// from the quantile base and pinned to the clip bounds instead, so one
// zero-variance pair cannot flatten everything else.
void clip_and_normalize(std::vector<double>& values, double q) {
    std::vector<double> real;
    for (double v : values) {
        if (!std::isnan(v) && std::abs(v) < kHugeZ) real.push_back(v);
    }
    if (real.empty()) {
        for (double& v : values) {
            if (std::isnan(v)) continue;
            v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
        return;
    }
    std::sort(real.begin(), real.end());
    auto quantile = [&](double p) {
        return real[std::min(real.size() - 1,
                             static_cast<std::size_t>(p * static_cast<double>(real.size())))];
    };
    double hi = quantile(q);
    double lo = quantile(1.0 - q);
    double scale = std::max(std::abs(lo), std::abs(hi));
    for (double& v : values) {
        if (std::isnan(v)) continue;
        v = std::clamp(v, lo, hi);
        v = scale > 0.0 ? v / scale : 0.0;
    }
}

}  // namespace

StealReport build_steal_report(const LanguageModel& model, const LanguageModel& calib,
                               const std::vector<LeakedText>& texts,
                               const std::vector<TokenId>& t1_tokens,
                               const StealParams& params) {
    if (texts.empty()) throw ConfigError("steal report: no leaked texts");
    if (t1_tokens.empty()) throw ConfigError("steal report: no t1 tokens");
    const std::size_t vocab_size = model.vocab().size();

    // contexts S: prompt plus a prefix of each leaked generation
    std::vector<TokenSeq> contexts;
    contexts.reserve(texts.size());
    for (const LeakedText& leaked : texts) {
        TokenSeq s = leaked.prompt;
        std::size_t take = std::min<std::size_t>(leaked.text.size(),
                                                 static_cast<std::size_t>(params.ctx_len));
        s.insert(s.end(), leaked.text.begin(), leaked.text.begin() + static_cast<std::ptrdiff_t>(take));
        contexts.push_back(std::move(s));
    }

    StealReport report;
    report.params = params;
    report.t1_tokens = t1_tokens;
    report.g.assign(t1_tokens.size(), std::vector<double>(vocab_size, kNaN));
    report.agg_max.assign(t1_tokens.size(), std::vector<double>(vocab_size, kNaN));
    report.agg_z.assign(t1_tokens.size(), std::vector<double>(vocab_size, kNaN));

    std::vector<std::vector<double>> samples(vocab_size);
    for (std::size_t i1 = 0; i1 < t1_tokens.size(); ++i1) {
        for (auto& s : samples) s.clear();
        for (const TokenSeq& s_ctx : contexts) {
            auto row = steal_statistic_row(model, calib, s_ctx, t1_tokens[i1], params.p_thresh);
            for (std::size_t t2 = 0; t2 < vocab_size; ++t2) {
                if (row[t2]) samples[t2].push_back(*row[t2]);
            }
        }

        std::vector<double>& vmax = report.agg_max[i1];
        std::vector<double>& vz = report.agg_z[i1];
        for (std::size_t t2 = 0; t2 < vocab_size; ++t2) {
            const std::vector<double>& s = samples[t2];
            if (s.size() < static_cast<std::size_t>(params.min_samples)) continue;  // unscored
            vmax[t2] = *std::max_element(s.begin(), s.end());
            double mean = 0.0;
            for (double v : s) mean += v;
            mean /= static_cast<double>(s.size());
            double var = 0.0;
            for (double v : s) var += (v - mean) * (v - mean);
            var /= static_cast<double>(s.size() - 1);
            double stderr_ = std::sqrt(var / static_cast<double>(s.size()));
            if (stderr_ > 0.0) {
                vz[t2] = mean / stderr_;
            } else {
                vz[t2] = mean > 0.0 ? kHugeZ : (mean < 0.0 ? -kHugeZ : 0.0);
            }
        }

        clip_and_normalize(vmax, params.clip_pct);
        clip_and_normalize(vz, params.clip_pct);
        for (std::size_t t2 = 0; t2 < vocab_size; ++t2) {
            if (std::isnan(vmax[t2]) || std::isnan(vz[t2])) continue;
            double norm = std::hypot(vmax[t2], vz[t2]);
            bool first_quadrant = vmax[t2] > 0.0 && vz[t2] > 0.0;
            report.g[i1][t2] = first_quadrant ? norm : -norm;
        }
    }
    return report;
}

std::vector<TokenId> most_frequent_tokens(const std::vector<LeakedText>& texts,
                                          const Vocabulary& vocab, int count) {
    if (count < 1) throw ConfigError("most_frequent_tokens: count must be >= 1");
    std::vector<std::int64_t> freq(vocab.size(), 0);
    for (const LeakedText& leaked : texts) {
        for (TokenId t : leaked.text) freq[static_cast<std::size_t>(t)]++;
    }
    std::vector<TokenId> order;
    for (std::size_t t = 0; t < freq.size(); ++t) {
        if (!vocab.is_special(static_cast<TokenId>(t)) && freq[t] > 0) {
            order.push_back(static_cast<TokenId>(t));
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        if (freq[static_cast<std::size_t>(a)] != freq[static_cast<std::size_t>(b)]) {
            return freq[static_cast<std::size_t>(a)] > freq[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    if (order.size() > static_cast<std::size_t>(count)) order.resize(static_cast<std::size_t>(count));
    return order;
}

ScrubPolicy::ScrubPolicy(const StealReport* report, double delta)
    : report_(report), delta_(delta) {
    if (!report_) throw ContractError("scrub: null steal report");
    if (!(delta > 0.0)) throw ConfigError("scrub: delta must be > 0");
}

NextTokenDist ScrubPolicy::step(const NextTokenDist& pre, int, TokenId prev_token) {
    auto it = std::find(report_->t1_tokens.begin(), report_->t1_tokens.end(), prev_token);
    if (it == report_->t1_tokens.end()) return pre;  // uncovered: exact pass-through
    const std::vector<double>& row =
        report_->g[static_cast<std::size_t>(it - report_->t1_tokens.begin())];

    NextTokenDist out = pre;
    for (std::size_t t2 = 0; t2 < out.size(); ++t2) {
        if (std::isnan(row[t2])) continue;
        out.probs[t2] *= std::exp(-delta_ * row[t2]);
    }
    out.renormalize();
    return out;
}

std::vector<UnigramRatio> unigram_frequency_analysis(const LanguageModel& model,
                                                     const LanguageModel& calib,
                                                     const std::vector<TokenSeq>& prompts,
                                                     int gen_len, std::uint64_t seed) {
    if (model.vocab().size() != calib.vocab().size()) {
        throw ContractError("unigram analysis: models must share a vocabulary");
    }
    if (prompts.empty() || gen_len < 1) throw ConfigError("unigram analysis: bad inputs");

    const std::size_t vocab_size = model.vocab().size();
    std::vector<std::int64_t> cm(vocab_size, 0), cc(vocab_size, 0);
    std::int64_t nm = 0, nc = 0;
    Rng rng(seed);
    Rng rng_model = rng.fork("model");
    Rng rng_calib = rng.fork("calib");
    for (const TokenSeq& prompt : prompts) {
        GenerationTrace tm = sample_decode(model, prompt, gen_len, rng_model.next_u64());
        for (TokenId t : tm.emitted) {
            cm[static_cast<std::size_t>(t)]++;
            ++nm;
        }
        GenerationTrace tc = sample_decode(calib, prompt, gen_len, rng_calib.next_u64());
        for (TokenId t : tc.emitted) {
            cc[static_cast<std::size_t>(t)]++;
            ++nc;
        }
    }

    const double vm = static_cast<double>(nm) + static_cast<double>(vocab_size);
    const double vc = static_cast<double>(nc) + static_cast<double>(vocab_size);
    std::vector<UnigramRatio> out;
    for (std::size_t t = 0; t < vocab_size; ++t) {
        // only tokens the suspect model over-emits are informative
        double fm = static_cast<double>(cm[t]) / std::max<double>(1.0, static_cast<double>(nm));
        double fc = static_cast<double>(cc[t]) / std::max<double>(1.0, static_cast<double>(nc));
        if (fm <= fc) continue;
        double ratio = ((static_cast<double>(cm[t]) + 1.0) / vm) /
                       ((static_cast<double>(cc[t]) + 1.0) / vc);
        out.push_back({static_cast<TokenId>(t), ratio});
    }
    std::stable_sort(out.begin(), out.end(), [](const UnigramRatio& a, const UnigramRatio& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        return a.token < b.token;
    });
    return out;
}

}  // namespace fpsim
