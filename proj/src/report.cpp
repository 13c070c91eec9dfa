#include "stochorder/report.hpp"

#include <cmath>

namespace stochorder {

std::string to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::inconclusive: return "inconclusive";
    }
    return "unknown";
}

ReportEntry& VerificationReport::add(ReportEntry entry) {
    entries_.push_back(std::move(entry));
    return entries_.back();
}

ReportEntry& VerificationReport::add(std::string check, Status status, double value, double tolerance,
                                     nlohmann::json witness, std::string note) {
    return add(ReportEntry{std::move(check), status, value, tolerance, std::move(witness), std::move(note)});
}

void VerificationReport::merge(const VerificationReport& other, const std::string& prefix) {
    for (auto entry : other.entries_) {
        if (!prefix.empty()) entry.check = prefix + "/" + entry.check;
        entries_.push_back(std::move(entry));
    }
}

Status VerificationReport::overall() const {
    bool undecided = false;
    for (const auto& e : entries_) {
        if (e.status == Status::fail) return Status::fail;
        if (e.status == Status::inconclusive) undecided = true;
    }
    return undecided ? Status::inconclusive : Status::pass;
}

const ReportEntry* VerificationReport::first(Status status) const {
    for (const auto& e : entries_) {
        if (e.status == status) return &e;
    }
    return nullptr;
}

namespace {

nlohmann::json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json out;
    out["subject"] = subject_;
    out["status"] = to_string(overall());
    auto& list = out["entries"] = nlohmann::json::array();
    for (const auto& e : entries_) {
        nlohmann::json j{{"check", e.check},
                         {"status", to_string(e.status)},
                         {"value", finite_or_string(e.value)},
                         {"tolerance", finite_or_string(e.tolerance)}};
        if (!e.witness.is_null()) j["witness"] = e.witness;
        if (!e.note.empty()) j["note"] = e.note;
        list.push_back(std::move(j));
    }
    if (!metrics_.empty()) out["metrics"] = metrics_;
    return out;
}

}  // namespace stochorder
