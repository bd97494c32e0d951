#pragma once

#include <string>
#include <string_view>

namespace entail_guard {

enum class NliLabel { Contradiction, Neutral, Entailment };

std::string_view to_string(NliLabel label);
NliLabel nli_label_from_string(std::string_view s);

/// Probability triple over the three NLI classes. Each field lies in [0,1]
/// and the triple sums to 1: the constructor absorbs any residual (at most
/// 1e-6) into the largest field so the other two keep their exact input
/// values, and rejects anything further from a distribution than that.
class NliDistribution {
public:
    NliDistribution(double contradiction, double neutral, double entailment);

    double contradiction() const { return contradiction_; }
    double neutral() const { return neutral_; }
    double entailment() const { return entailment_; }

    double probability_of(NliLabel label) const;

    friend bool operator==(const NliDistribution&, const NliDistribution&) = default;

private:
    double contradiction_;
    double neutral_;
    double entailment_;
};

enum class StrategyKind { Control, Ent, Con, Neu };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(std::string_view s);

/// Acceptance predicate applied to a candidate sentence's NLI distribution.
/// neutral_threshold is only consulted by the Neu kind.
struct Strategy {
    StrategyKind kind = StrategyKind::Control;
    double neutral_threshold = 0.85;

    static Strategy control() { return {StrategyKind::Control, 0.85}; }
    static Strategy ent() { return {StrategyKind::Ent, 0.85}; }
    static Strategy con() { return {StrategyKind::Con, 0.85}; }
    static Strategy neu(double threshold = 0.85);
};

/// Control accepts everything; Ent requires P(ent) > P(con); Con the mirror;
/// Neu requires P(neutral) strictly above the threshold.
bool accepts(const Strategy& strategy, const NliDistribution& d);

/// Argmax label; exact ties resolve in the fixed order
/// Contradiction < Neutral < Entailment (lowest wins).
NliLabel label_of(const NliDistribution& d);

}  // namespace entail_guard
