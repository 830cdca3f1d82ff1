#include "ciplan/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ciplan {

nlohmann::json value_table_json(const ValueTable& table) {
    nlohmann::json times = nlohmann::json::array();
    for (std::size_t t = 0; t < table.by_time.size(); ++t) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [key, e] : table.by_time[t]) {
            nlohmann::json row{{"key", key}, {"value", e.value}, {"argmax", e.argmax}};
            if (!e.q.empty()) row["q"] = e.q;
            entries.push_back(std::move(row));
        }
        times.push_back({{"t", t + 1}, {"entries", entries}});
    }
    return {{"objective", table.objective}, {"times", times}};
}

std::string value_table_text(const ValueTable& table) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-40s %16s %8s\n", "t", "key", "value", "argmax");
    out << line;
    for (std::size_t t = 0; t < table.by_time.size(); ++t)
        for (const auto& [key, e] : table.by_time[t]) {
            std::string k = key.size() > 40 ? key.substr(0, 37) + "..." : key;
            std::snprintf(line, sizeof line, "%-4zu %-40s %16.9f %8lld\n", t + 1, k.c_str(), e.value,
                          static_cast<long long>(e.argmax));
            out << line;
        }
    std::snprintf(line, sizeof line, "J = %.12f\n", table.objective);
    out << line;
    return out.str();
}

std::string params_text(const MeasuredParams& m) {
    std::ostringstream out;
    char line[256];
    auto row = [&](const char* name, double v, const Witness& w) {
        std::snprintf(line, sizeof line, "%-8s %16.12f  t=%d fcs=%s\n", name, v, w.time, w.fcs.c_str());
        out << line;
    };
    row("eps_p", m.eps_p, m.eps_p_witness);
    row("delta_p", m.delta_p, m.delta_p_witness);
    row("eps_c", m.eps_c, m.eps_c_witness);
    row("delta_c", m.delta_c, m.delta_c_witness);
    out << "mu       " << m.mu << "\n";
    return out.str();
}

std::string conditions_text(const ConditionReport& report) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-5s %16s %16s %10s\n", "condition", "pass", "max_violation", "min_slack",
                  "cases");
    out << line;
    for (const auto& c : report.conditions) {
        std::string slack = std::isfinite(c.min_slack) ? std::to_string(c.min_slack) : "-";
        std::snprintf(line, sizeof line, "%-10s %-5s %16.12f %16s %10lld\n", c.id.c_str(), c.pass ? "ok" : "FAIL",
                      c.max_violation, slack.c_str(), c.cases);
        out << line;
        if (!c.note.empty()) out << "           " << c.note << "\n";
    }
    out << (report.pass() ? "PASS" : "FAIL") << "\n";
    return out.str();
}

} // namespace ciplan
