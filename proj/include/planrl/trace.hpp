#pragma once

#include "planrl/search.hpp"
#include "planrl/task.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace planrl {

/*
  Step-by-step plan trace: alternating "state:i" blocks (one fact per line,
  sorted) and "action:i" blocks with PRE/ADD/DEL lines. The trace ends with
  the last action block; the final state is implied.
*/
inline std::string format_plan_trace(const PlanningTask &task,
                                     const FactSet &start, const Plan &plan) {
    std::ostringstream os;
    auto sorted_fact_lines = [&](const FactSet &s) {
        std::vector<std::string> lines;
        for (FactId f : s)
            lines.push_back(task.fact(f).str());
        std::sort(lines.begin(), lines.end());
        return lines;
    };

    FactSet state = start;
    for (size_t i = 0; i < plan.operators.size(); ++i) {
        os << "state:" << i << "\n";
        for (const auto &line : sorted_fact_lines(state))
            os << line << "\n";
        os << "\n";

        const GroundOperator &op = task.operators[plan.operators[i]];
        os << "action:" << i << "\n";
        os << op.name << "\n";
        for (const auto &line : sorted_fact_lines(op.pre))
            os << "  PRE: " << line << "\n";
        for (const auto &line : sorted_fact_lines(op.add))
            os << "  ADD: " << line << "\n";
        for (const auto &line : sorted_fact_lines(op.del))
            os << "  DEL: " << line << "\n";
        if (i + 1 < plan.operators.size())
            os << "\n";
        state = apply(state, op);
    }
    if (plan.operators.empty()) {
        os << "state:0\n";
        for (const auto &line : sorted_fact_lines(state))
            os << line << "\n";
    }
    return os.str();
}

} // namespace planrl
