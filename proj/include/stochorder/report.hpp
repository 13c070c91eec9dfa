#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace stochorder {

enum class Status { pass, fail, inconclusive };

std::string to_string(Status s);

/// One checked obligation: what was tested, the observed value, the tolerance
/// it was held to, and (on failure) where it broke.
struct ReportEntry {
    std::string check;
    Status status = Status::pass;
    double value = 0.0;
    double tolerance = 0.0;
    nlohmann::json witness;
    std::string note;
};

/// Structured pass/fail record. The overall status is `fail` if any entry
/// failed, otherwise `inconclusive` if any entry was, otherwise `pass`.
class VerificationReport {
public:
    explicit VerificationReport(std::string subject = {}) : subject_(std::move(subject)) {}

    ReportEntry& add(ReportEntry entry);
    ReportEntry& add(std::string check, Status status, double value = 0.0, double tolerance = 0.0,
                     nlohmann::json witness = {}, std::string note = {});
    void merge(const VerificationReport& other, const std::string& prefix = {});

    [[nodiscard]] Status overall() const;
    [[nodiscard]] bool passed() const { return overall() == Status::pass; }
    [[nodiscard]] const std::vector<ReportEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const std::string& subject() const noexcept { return subject_; }
    /// First entry with the given status, or nullptr.
    [[nodiscard]] const ReportEntry* first(Status status) const;

    nlohmann::json& metrics() noexcept { return metrics_; }
    [[nodiscard]] const nlohmann::json& metrics() const noexcept { return metrics_; }

    [[nodiscard]] nlohmann::json to_json() const;

private:
    std::string subject_;
    std::vector<ReportEntry> entries_;
    nlohmann::json metrics_ = nlohmann::json::object();
};

}  // namespace stochorder
