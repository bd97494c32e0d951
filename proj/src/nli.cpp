#include "entail_guard/nli.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "entail_guard/errors.hpp"

namespace entail_guard {

namespace {

constexpr double kSumTolerance = 1e-6;

void check_unit_range(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream msg;
        msg << "NLI probability '" << name << "' out of [0,1]: " << v;
        throw ValidationError(msg.str());
    }
}

}  // namespace

NliDistribution::NliDistribution(double contradiction, double neutral, double entailment)
    : contradiction_(contradiction), neutral_(neutral), entailment_(entailment) {
    check_unit_range(contradiction_, "contradiction");
    check_unit_range(neutral_, "neutral");
    check_unit_range(entailment_, "entailment");
    double sum = contradiction_ + neutral_ + entailment_;
    if (std::abs(sum - 1.0) > kSumTolerance) {
        std::ostringstream msg;
        msg << "NLI probabilities sum to " << sum << ", expected 1 within " << kSumTolerance;
        throw ValidationError(msg.str());
    }
    // Absorb the residual into the largest field (first max in field order).
    // Dividing by the sum instead would perturb every field and could push a
    // value across a strict strategy boundary it was exactly on.
    for (int pass = 0; pass < 3 && sum != 1.0; ++pass) {
        double* largest = &contradiction_;
        if (neutral_ > *largest) largest = &neutral_;
        if (entailment_ > *largest) largest = &entailment_;
        *largest = std::min(*largest - (sum - 1.0), 1.0);
        sum = contradiction_ + neutral_ + entailment_;
    }
}

double NliDistribution::probability_of(NliLabel label) const {
    switch (label) {
        case NliLabel::Contradiction: return contradiction_;
        case NliLabel::Neutral: return neutral_;
        case NliLabel::Entailment: return entailment_;
    }
    throw ValidationError("unknown NLI label");
}

std::string_view to_string(NliLabel label) {
    switch (label) {
        case NliLabel::Contradiction: return "CON";
        case NliLabel::Neutral: return "NEU";
        case NliLabel::Entailment: return "ENT";
    }
    throw ValidationError("unknown NLI label");
}

NliLabel nli_label_from_string(std::string_view s) {
    if (s == "CON") return NliLabel::Contradiction;
    if (s == "NEU") return NliLabel::Neutral;
    if (s == "ENT") return NliLabel::Entailment;
    throw ValidationError("unknown NLI label: " + std::string(s));
}

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Control: return "CONTROL";
        case StrategyKind::Ent: return "ENT";
        case StrategyKind::Con: return "CON";
        case StrategyKind::Neu: return "NEU";
    }
    throw ValidationError("unknown strategy kind");
}

StrategyKind strategy_kind_from_string(std::string_view s) {
    if (s == "CONTROL" || s == "control") return StrategyKind::Control;
    if (s == "ENT" || s == "ent") return StrategyKind::Ent;
    if (s == "CON" || s == "con") return StrategyKind::Con;
    if (s == "NEU" || s == "neu") return StrategyKind::Neu;
    throw ValidationError("unknown strategy kind: " + std::string(s));
}

Strategy Strategy::neu(double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ValidationError("neutral threshold out of [0,1]");
    }
    return {StrategyKind::Neu, threshold};
}

bool accepts(const Strategy& strategy, const NliDistribution& d) {
    switch (strategy.kind) {
        case StrategyKind::Control:
            return true;
        case StrategyKind::Ent:
            return d.entailment() > d.contradiction();
        case StrategyKind::Con:
            return d.contradiction() > d.entailment();
        case StrategyKind::Neu:
            if (!(strategy.neutral_threshold >= 0.0 && strategy.neutral_threshold <= 1.0)) {
                throw ValidationError("neutral threshold out of [0,1]");
            }
            return d.neutral() > strategy.neutral_threshold;
    }
    throw ValidationError("unknown strategy kind");
}

NliLabel label_of(const NliDistribution& d) {
    // Fixed tie order: Contradiction, then Neutral, then Entailment.
    NliLabel best = NliLabel::Contradiction;
    double best_p = d.contradiction();
    if (d.neutral() > best_p) {
        best = NliLabel::Neutral;
        best_p = d.neutral();
    }
    if (d.entailment() > best_p) {
        best = NliLabel::Entailment;
    }
    return best;
}

}  // namespace entail_guard
