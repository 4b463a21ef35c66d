#pragma once

#include "planrl/pddl.hpp"
#include "planrl/task.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace planrl {

/*
  Grounds a parsed domain/problem pair into a PlanningTask.

  A predicate is static iff no action effect mentions it. Operators whose
  static preconditions are not satisfied by the initial state are dropped,
  and static facts are stripped from the remaining preconditions and from
  the initial state. Fact ids are assigned in lexicographic atom order over
  the relaxed-reachable atoms, so identical input text grounds to an
  identical task.
*/

struct GroundingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline pddl::Atom substitute(const pddl::Atom &schema,
                             const std::unordered_map<std::string, std::string> &binding) {
    pddl::Atom out;
    out.predicate = schema.predicate;
    out.args.reserve(schema.args.size());
    for (const auto &arg : schema.args) {
        if (!arg.empty() && arg[0] == '?') {
            auto it = binding.find(arg);
            if (it == binding.end())
                throw GroundingError("unbound variable " + arg + " in " +
                                     schema.predicate);
            out.args.push_back(it->second);
        } else {
            out.args.push_back(arg);
        }
    }
    return out;
}

} // namespace detail

inline void validate_problem_against_domain(const pddl::DomainAst &domain,
                                            const pddl::ProblemAst &problem) {
    for (const auto &obj : problem.objects)
        if (!domain.has_type(obj.type))
            throw GroundingError("object " + obj.name + " has undeclared type " +
                                 obj.type);
    std::unordered_map<std::string, std::string> object_type;
    for (const auto &obj : problem.objects)
        object_type[obj.name] = obj.type;
    auto check_ground_atom = [&](const pddl::Atom &atom, const char *where) {
        const pddl::PredicateSchema *schema = domain.find_predicate(atom.predicate);
        if (!schema)
            throw GroundingError(std::string(where) + " atom " + atom.str() +
                                 " uses undeclared predicate");
        if (schema->params.size() != atom.args.size())
            throw GroundingError(std::string(where) + " atom " + atom.str() +
                                 " has wrong arity");
        for (size_t i = 0; i < atom.args.size(); ++i) {
            auto it = object_type.find(atom.args[i]);
            if (it == object_type.end())
                throw GroundingError(std::string(where) + " atom " + atom.str() +
                                     " uses undeclared object " + atom.args[i]);
            const std::string &want = schema->params[i].type;
            if (want != "object" && it->second != want)
                throw GroundingError(std::string(where) + " atom " + atom.str() +
                                     ": argument " + atom.args[i] + " has type " +
                                     it->second + ", expected " + want);
        }
    };
    for (const auto &a : problem.init)
        check_ground_atom(a, "init");
    for (const auto &a : problem.goal)
        check_ground_atom(a, "goal");
}

inline std::set<std::string> static_predicates(const pddl::DomainAst &domain) {
    std::set<std::string> statics;
    for (const auto &p : domain.predicates)
        statics.insert(p.name);
    for (const auto &a : domain.actions) {
        for (const auto &atom : a.add_effects)
            statics.erase(atom.predicate);
        for (const auto &atom : a.del_effects)
            statics.erase(atom.predicate);
    }
    return statics;
}

inline PlanningTask ground(const pddl::DomainAst &domain,
                           const pddl::ProblemAst &problem) {
    validate_problem_against_domain(domain, problem);

    const std::set<std::string> statics = static_predicates(domain);
    std::unordered_set<std::string> static_init; // atom strings true in init
    for (const auto &a : problem.init)
        if (statics.count(a.predicate))
            static_init.insert(a.str());

    std::map<std::string, std::vector<std::string>> objects_by_type;
    for (const auto &obj : problem.objects)
        objects_by_type[obj.type].push_back(obj.name);
    for (auto &[type, names] : objects_by_type)
        std::sort(names.begin(), names.end());

    struct Candidate {
        std::string name;
        std::vector<pddl::Atom> pre, add, del;
    };
    std::vector<Candidate> candidates;

    // Enumerate typed bindings per action schema, filtering on static
    // preconditions as soon as the binding is complete.
    for (const auto &action : domain.actions) {
        std::vector<std::vector<std::string>> domains;
        for (const auto &param : action.params) {
            std::vector<std::string> values;
            if (param.type == "object") {
                for (const auto &obj : problem.objects)
                    values.push_back(obj.name);
                std::sort(values.begin(), values.end());
            } else {
                auto it = objects_by_type.find(param.type);
                if (it != objects_by_type.end())
                    values = it->second;
            }
            domains.push_back(std::move(values));
        }

        std::vector<size_t> idx(action.params.size(), 0);
        bool done = std::any_of(domains.begin(), domains.end(),
                                [](const auto &d) { return d.empty(); }) &&
                    !action.params.empty();
        while (!done) {
            std::unordered_map<std::string, std::string> binding;
            for (size_t i = 0; i < action.params.size(); ++i)
                binding[action.params[i].name] = domains[i][idx[i]];

            bool statics_ok = true;
            Candidate c;
            c.name = "(" + action.name;
            for (size_t i = 0; i < action.params.size(); ++i)
                c.name += " " + binding[action.params[i].name];
            c.name += ")";
            for (const auto &atom : action.preconditions) {
                pddl::Atom g = detail::substitute(atom, binding);
                if (statics.count(g.predicate)) {
                    if (!static_init.count(g.str())) {
                        statics_ok = false;
                        break;
                    }
                } else {
                    c.pre.push_back(std::move(g));
                }
            }
            if (statics_ok) {
                for (const auto &atom : action.add_effects)
                    c.add.push_back(detail::substitute(atom, binding));
                for (const auto &atom : action.del_effects)
                    c.del.push_back(detail::substitute(atom, binding));
                candidates.push_back(std::move(c));
            }

            if (action.params.empty())
                break;
            size_t k = action.params.size();
            while (k > 0) {
                --k;
                if (++idx[k] < domains[k].size())
                    break;
                idx[k] = 0;
                if (k == 0)
                    done = true;
            }
        }
    }

    // Relaxed reachability over non-static atoms: a fixpoint of init plus
    // add effects of operators whose preconditions are relaxed-reachable.
    std::set<std::string> reachable;
    for (const auto &a : problem.init)
        if (!statics.count(a.predicate))
            reachable.insert(a.str());
    std::vector<bool> used(candidates.size(), false);
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (used[i])
                continue;
            bool ok = true;
            for (const auto &a : candidates[i].pre)
                if (!reachable.count(a.str())) {
                    ok = false;
                    break;
                }
            if (!ok)
                continue;
            used[i] = true;
            for (const auto &a : candidates[i].add)
                if (reachable.insert(a.str()).second)
                    changed = true;
        }
    }

    // Fact table: lexicographic over reachable atoms.
    std::map<std::string, pddl::Atom> atom_by_str;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!used[i])
            continue;
        for (const auto &a : candidates[i].pre)
            atom_by_str.emplace(a.str(), a);
        for (const auto &a : candidates[i].add)
            atom_by_str.emplace(a.str(), a);
        for (const auto &a : candidates[i].del)
            if (reachable.count(a.str()))
                atom_by_str.emplace(a.str(), a);
    }
    for (const auto &a : problem.init)
        if (!statics.count(a.predicate))
            atom_by_str.emplace(a.str(), a);

    PlanningTask task;
    std::unordered_map<std::string, FactId> id_of;
    for (const auto &[str, atom] : atom_by_str) {
        FactId id = static_cast<FactId>(task.facts.size());
        task.facts.push_back({id, atom});
        id_of[str] = id;
    }

    auto to_fact_set = [&](const std::vector<pddl::Atom> &atoms,
                           bool skip_unreachable) {
        std::vector<FactId> ids;
        for (const auto &a : atoms) {
            auto it = id_of.find(a.str());
            if (it == id_of.end()) {
                if (skip_unreachable)
                    continue;
                throw GroundingError("atom " + a.str() + " missing from fact table");
            }
            ids.push_back(it->second);
        }
        return FactSet(std::move(ids));
    };

    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!used[i])
            continue;
        GroundOperator op;
        op.name = candidates[i].name;
        op.pre = to_fact_set(candidates[i].pre, false);
        op.add = to_fact_set(candidates[i].add, false);
        op.del = to_fact_set(candidates[i].del, true); // deleting an unreachable fact is a no-op
        op.prevail = set_difference(op.pre, op.effect_facts());
        if (op.add.intersects(op.del))
            throw GroundingError("operator " + op.name +
                                 " adds and deletes the same fact");
        // Deleting a fact the precondition does not require is legal
        // (a no-op when the fact is absent) but worth flagging.
        if (!op.del.is_subset_of(op.pre))
            task.warnings.push_back("operator " + op.name +
                                    " deletes facts outside its precondition");
        task.operators.push_back(std::move(op));
    }

    std::vector<FactId> init_ids;
    for (const auto &a : problem.init)
        if (!statics.count(a.predicate))
            init_ids.push_back(id_of.at(a.str()));
    task.init = FactSet(std::move(init_ids));

    std::vector<FactId> goal_ids;
    for (const auto &a : problem.goal) {
        if (statics.count(a.predicate)) {
            if (!static_init.count(a.str()))
                task.goal_reachable_in_relaxation = false;
            continue;
        }
        auto it = id_of.find(a.str());
        if (it == id_of.end()) {
            task.goal_reachable_in_relaxation = false;
            continue;
        }
        goal_ids.push_back(it->second);
    }
    task.goal = FactSet(std::move(goal_ids));

    task.rebuild_indices();
    return task;
}

} // namespace planrl
