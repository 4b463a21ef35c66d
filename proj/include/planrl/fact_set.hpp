#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace planrl {

using FactId = int32_t;

/*
  A set of fact ids, kept as a sorted, duplicate-free vector. All planning
  states and operator conditions are FactSets; keeping them canonical makes
  equality, hashing and the subset tests cheap.
*/
class FactSet {
public:
    FactSet() = default;

    explicit FactSet(std::vector<FactId> ids) : ids_(std::move(ids)) {
        normalize();
    }

    FactSet(std::initializer_list<FactId> ids) : ids_(ids) {
        normalize();
    }

    static FactSet singleton(FactId f) {
        FactSet s;
        s.ids_.push_back(f);
        return s;
    }

    bool empty() const { return ids_.empty(); }
    size_t size() const { return ids_.size(); }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }
    const std::vector<FactId> &ids() const { return ids_; }

    bool contains(FactId f) const {
        return std::binary_search(ids_.begin(), ids_.end(), f);
    }

    bool is_subset_of(const FactSet &other) const {
        return std::includes(other.ids_.begin(), other.ids_.end(),
                             ids_.begin(), ids_.end());
    }

    bool intersects(const FactSet &other) const {
        auto a = ids_.begin();
        auto b = other.ids_.begin();
        while (a != ids_.end() && b != other.ids_.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                return true;
            }
        }
        return false;
    }

    void insert(FactId f) {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), f);
        if (it == ids_.end() || *it != f)
            ids_.insert(it, f);
    }

    void erase(FactId f) {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), f);
        if (it != ids_.end() && *it == f)
            ids_.erase(it);
    }

    friend FactSet set_union(const FactSet &a, const FactSet &b) {
        FactSet r;
        r.ids_.reserve(a.size() + b.size());
        std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                       std::back_inserter(r.ids_));
        return r;
    }

    friend FactSet set_difference(const FactSet &a, const FactSet &b) {
        FactSet r;
        r.ids_.reserve(a.size());
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                            std::back_inserter(r.ids_));
        return r;
    }

    friend FactSet set_intersection(const FactSet &a, const FactSet &b) {
        FactSet r;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                              std::back_inserter(r.ids_));
        return r;
    }

    // Number of facts in this set that are missing from `other`.
    size_t count_missing_from(const FactSet &other) const {
        size_t missing = 0;
        auto b = other.ids_.begin();
        for (FactId f : ids_) {
            while (b != other.ids_.end() && *b < f)
                ++b;
            if (b == other.ids_.end() || *b != f)
                ++missing;
        }
        return missing;
    }

    bool operator==(const FactSet &other) const = default;

    bool operator<(const FactSet &other) const {
        return ids_ < other.ids_;
    }

    uint64_t hash() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (FactId f : ids_) {
            h ^= static_cast<uint64_t>(f) + 0x9e3779b97f4a7c15ULL;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    void normalize() {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }

    std::vector<FactId> ids_;
};

struct FactSetHash {
    size_t operator()(const FactSet &s) const { return s.hash(); }
};

} // namespace planrl
