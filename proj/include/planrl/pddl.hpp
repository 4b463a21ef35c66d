#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace planrl::pddl {

/*
  Front end for the typed-STRIPS dialect used by the shipped planning files:
  (:requirements :strips :typing), conjunctive positive preconditions,
  conjunctive effects with (not ...) deletes. Identifiers are case-folded to
  lower case, so ground atoms print the way plan traces spell them.
*/

struct ParseError : std::runtime_error {
    ParseError(const std::string &msg, int line, int column)
        : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                             std::to_string(column) + ": " + msg),
          line(line), column(column) {}

    int line;
    int column;
};

struct Atom {
    std::string predicate;
    std::vector<std::string> args; // object names or ?variables

    bool operator==(const Atom &) const = default;
    bool operator<(const Atom &other) const {
        if (predicate != other.predicate)
            return predicate < other.predicate;
        return args < other.args;
    }

    std::string str() const {
        std::string s = "(" + predicate;
        for (const auto &a : args)
            s += " " + a;
        s += ")";
        return s;
    }
};

struct TypedName {
    std::string name;
    std::string type;

    bool operator==(const TypedName &) const = default;
};

struct PredicateSchema {
    std::string name;
    std::vector<TypedName> params;

    bool operator==(const PredicateSchema &) const = default;
};

struct ActionSchema {
    std::string name;
    std::vector<TypedName> params;
    std::vector<Atom> preconditions; // positive atoms only
    std::vector<Atom> add_effects;
    std::vector<Atom> del_effects;

    bool operator==(const ActionSchema &) const = default;
};

struct DomainAst {
    std::string name;
    std::vector<std::string> requirements;
    std::vector<std::string> types; // declared type names (all subtypes of object)
    std::vector<PredicateSchema> predicates;
    std::vector<ActionSchema> actions;

    bool operator==(const DomainAst &) const = default;

    const PredicateSchema *find_predicate(const std::string &name) const {
        for (const auto &p : predicates)
            if (p.name == name)
                return &p;
        return nullptr;
    }

    bool has_type(const std::string &t) const {
        if (t == "object")
            return true;
        for (const auto &d : types)
            if (d == t)
                return true;
        return false;
    }
};

struct ProblemAst {
    std::string name;
    std::string domain_name;
    std::vector<TypedName> objects;
    std::vector<Atom> init; // duplicates collapsed, original order otherwise
    std::vector<Atom> goal; // conjunction, order preserved

    bool operator==(const ProblemAst &) const = default;
};

namespace detail {

struct Token {
    enum Kind { LParen, RParen, Symbol, End } kind;
    std::string text;
    int line;
    int column;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        skip_ws_and_comments();
        int line = line_, col = col_;
        if (pos_ >= text_.size())
            return {Token::End, "", line, col};
        char c = text_[pos_];
        if (c == '(') {
            advance();
            return {Token::LParen, "(", line, col};
        }
        if (c == ')') {
            advance();
            return {Token::RParen, ")", line, col};
        }
        std::string sym;
        while (pos_ < text_.size() && !std::isspace((unsigned char)text_[pos_]) &&
               text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';') {
            sym += (char)std::tolower((unsigned char)text_[pos_]);
            advance();
        }
        if (sym.empty())
            throw ParseError("unexpected character '" + std::string(1, c) + "'",
                             line, col);
        return {Token::Symbol, sym, line, col};
    }

private:
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_ws_and_comments() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace((unsigned char)c)) {
                advance();
            } else if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    advance();
            } else {
                break;
            }
        }
    }

    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view text) : lexer_(text) { shift(); }

    DomainAst parse_domain() {
        DomainAst d;
        std::vector<std::pair<int, int>> action_positions;
        expect_lparen();
        expect_symbol("define");
        expect_lparen();
        expect_symbol("domain");
        d.name = expect_name("domain name");
        expect_rparen();
        while (peek_.kind == Token::LParen) {
            expect_lparen();
            std::string section = expect_name("section keyword");
            if (section == ":requirements") {
                while (peek_.kind == Token::Symbol) {
                    std::string req = take_symbol();
                    if (req != ":strips" && req != ":typing")
                        throw ParseError("unsupported requirement " + req,
                                         prev_.line, prev_.column);
                    d.requirements.push_back(req);
                }
                expect_rparen();
            } else if (section == ":types") {
                auto typed = parse_typed_list("type");
                for (const auto &t : typed) {
                    if (t.type != "object")
                        throw ParseError("only 'object' supertypes are supported",
                                         prev_.line, prev_.column);
                    d.types.push_back(t.name);
                }
                expect_rparen();
            } else if (section == ":predicates") {
                while (peek_.kind == Token::LParen) {
                    expect_lparen();
                    PredicateSchema p;
                    p.name = expect_name("predicate name");
                    p.params = parse_typed_list("parameter");
                    for (auto &v : p.params)
                        check_variable(v.name);
                    expect_rparen();
                    d.predicates.push_back(std::move(p));
                }
                expect_rparen();
            } else if (section == ":action") {
                action_positions.emplace_back(prev_.line, prev_.column);
                d.actions.push_back(parse_action(d));
            } else {
                throw ParseError("unknown domain section " + section, prev_.line,
                                 prev_.column);
            }
        }
        expect_rparen();
        expect_end();
        validate_domain(d, action_positions);
        return d;
    }

    ProblemAst parse_problem() {
        ProblemAst p;
        expect_lparen();
        expect_symbol("define");
        expect_lparen();
        expect_symbol("problem");
        p.name = expect_name("problem name");
        expect_rparen();
        while (peek_.kind == Token::LParen) {
            expect_lparen();
            std::string section = expect_name("section keyword");
            if (section == ":domain") {
                p.domain_name = expect_name("domain name");
                expect_rparen();
            } else if (section == ":objects") {
                p.objects = parse_typed_list("object");
                expect_rparen();
            } else if (section == ":init") {
                while (peek_.kind == Token::LParen) {
                    Atom a = parse_atom();
                    bool dup = false;
                    for (const auto &b : p.init)
                        if (b == a)
                            dup = true;
                    if (!dup)
                        p.init.push_back(std::move(a));
                }
                expect_rparen();
            } else if (section == ":goal") {
                p.goal = parse_conjunction();
                expect_rparen();
            } else {
                throw ParseError("unknown problem section " + section, prev_.line,
                                 prev_.column);
            }
        }
        expect_rparen();
        expect_end();
        return p;
    }

private:
    ActionSchema parse_action(const DomainAst &d) {
        ActionSchema a;
        a.name = expect_name("action name");
        while (peek_.kind == Token::Symbol) {
            std::string key = take_symbol();
            if (key == ":parameters") {
                expect_lparen();
                a.params = parse_typed_list("parameter");
                for (auto &v : a.params)
                    check_variable(v.name);
                expect_rparen();
            } else if (key == ":precondition") {
                a.preconditions = parse_conjunction();
            } else if (key == ":effect") {
                parse_effect(a);
            } else {
                throw ParseError("unknown action keyword " + key, prev_.line,
                                 prev_.column);
            }
        }
        expect_rparen();
        (void)d;
        return a;
    }

    // (and (p ...) (q ...)) or a single (p ...); negations are rejected.
    std::vector<Atom> parse_conjunction() {
        std::vector<Atom> atoms;
        expect_lparen();
        if (peek_.kind == Token::Symbol && peek_.text == "and") {
            take_symbol();
            while (peek_.kind == Token::LParen)
                atoms.push_back(parse_atom());
            expect_rparen();
        } else {
            Atom a = parse_atom_body();
            atoms.push_back(std::move(a));
        }
        for (const auto &a : atoms)
            if (a.predicate == "not")
                throw ParseError("negated conditions are not supported",
                                 prev_.line, prev_.column);
        return atoms;
    }

    void parse_effect(ActionSchema &a) {
        expect_lparen();
        if (peek_.kind == Token::Symbol && peek_.text == "and") {
            take_symbol();
            while (peek_.kind == Token::LParen)
                parse_effect_literal(a);
            expect_rparen();
        } else {
            parse_effect_literal_body(a);
        }
    }

    void parse_effect_literal(ActionSchema &a) {
        expect_lparen();
        parse_effect_literal_body(a);
    }

    void parse_effect_literal_body(ActionSchema &a) {
        if (peek_.kind == Token::Symbol && peek_.text == "not") {
            take_symbol();
            Atom atom = parse_atom();
            expect_rparen();
            append_unique(a.del_effects, atom, "delete effect");
        } else {
            Atom atom = parse_atom_body();
            append_unique(a.add_effects, atom, "add effect");
        }
    }

    void append_unique(std::vector<Atom> &v, const Atom &a, const char *what) {
        for (const auto &b : v)
            if (b == a)
                throw ParseError(std::string("duplicated ") + what + " " + a.str(),
                                 prev_.line, prev_.column);
        v.push_back(a);
    }

    Atom parse_atom() {
        expect_lparen();
        return parse_atom_body();
    }

    Atom parse_atom_body() {
        Atom a;
        a.predicate = expect_name("predicate name");
        while (peek_.kind == Token::Symbol)
            a.args.push_back(take_symbol());
        expect_rparen();
        return a;
    }

    // name1 name2 - type name3 - type ...; a trailing group without a dash
    // gets type "object".
    std::vector<TypedName> parse_typed_list(const char *what) {
        std::vector<TypedName> result;
        std::vector<std::string> pending;
        while (peek_.kind == Token::Symbol) {
            std::string s = take_symbol();
            if (s == "-") {
                std::string type = expect_name("type name");
                if (pending.empty())
                    throw ParseError(std::string("dangling type for empty ") +
                                         what + " group",
                                     prev_.line, prev_.column);
                for (auto &n : pending)
                    result.push_back({std::move(n), type});
                pending.clear();
            } else {
                pending.push_back(std::move(s));
            }
        }
        for (auto &n : pending)
            result.push_back({std::move(n), "object"});
        return result;
    }

    void check_variable(const std::string &name) {
        if (name.empty() || name[0] != '?')
            throw ParseError("expected ?variable, got " + name, prev_.line,
                             prev_.column);
    }

    void validate_domain(const DomainAst &d,
                         const std::vector<std::pair<int, int>> &positions) {
        for (const auto &p : d.predicates)
            for (const auto &param : p.params)
                if (!d.has_type(param.type))
                    throw ParseError("undeclared type " + param.type +
                                         " in predicate " + p.name,
                                     1, 1);
        for (size_t i = 0; i < d.actions.size(); ++i) {
            const ActionSchema &a = d.actions[i];
            int line = positions[i].first, column = positions[i].second;
            for (const auto &param : a.params)
                if (!d.has_type(param.type))
                    throw ParseError("undeclared type " + param.type +
                                         " in action " + a.name,
                                     line, column);
            auto check_atom = [&](const Atom &atom, const char *where) {
                const PredicateSchema *schema = d.find_predicate(atom.predicate);
                if (!schema)
                    throw ParseError("undeclared predicate " + atom.predicate +
                                         " in " + where + " of " + a.name,
                                     line, column);
                if (schema->params.size() != atom.args.size())
                    throw ParseError("arity mismatch for " + atom.predicate +
                                         " in " + where + " of " + a.name,
                                     line, column);
                for (const auto &arg : atom.args) {
                    if (arg.empty() || arg[0] != '?')
                        continue; // constants in schemas are not used here
                    bool found = false;
                    for (const auto &param : a.params)
                        if (param.name == arg)
                            found = true;
                    if (!found)
                        throw ParseError("unbound variable " + arg + " in " +
                                             where + " of " + a.name,
                                         line, column);
                }
            };
            for (const auto &atom : a.preconditions)
                check_atom(atom, "precondition");
            for (const auto &atom : a.add_effects)
                check_atom(atom, "effect");
            for (const auto &atom : a.del_effects)
                check_atom(atom, "effect");
        }
    }

    void shift() { peek_ = lexer_.next(); }

    std::string take_symbol() {
        prev_ = peek_;
        std::string s = peek_.text;
        shift();
        return s;
    }

    std::string expect_name(const char *what) {
        if (peek_.kind != Token::Symbol)
            throw ParseError(std::string("expected ") + what, peek_.line,
                             peek_.column);
        return take_symbol();
    }

    void expect_symbol(const std::string &text) {
        if (peek_.kind != Token::Symbol || peek_.text != text)
            throw ParseError("expected '" + text + "'", peek_.line, peek_.column);
        take_symbol();
    }

    void expect_lparen() {
        if (peek_.kind != Token::LParen)
            throw ParseError("expected '('", peek_.line, peek_.column);
        prev_ = peek_;
        shift();
    }

    void expect_rparen() {
        if (peek_.kind != Token::RParen)
            throw ParseError("expected ')'", peek_.line, peek_.column);
        prev_ = peek_;
        shift();
    }

    void expect_end() {
        if (peek_.kind != Token::End)
            throw ParseError("trailing input after top-level form", peek_.line,
                             peek_.column);
    }

    Lexer lexer_;
    Token peek_{};
    Token prev_{};
};

} // namespace detail

inline DomainAst parse_domain(std::string_view text) {
    return detail::Parser(text).parse_domain();
}

inline ProblemAst parse_problem(std::string_view text) {
    return detail::Parser(text).parse_problem();
}

// Pretty-printers; print_domain/print_problem output re-parses to an equal AST.

inline void print_typed_list(std::ostream &os, const std::vector<TypedName> &ts) {
    for (const auto &t : ts)
        os << t.name << " - " << t.type << " ";
}

inline std::string print_domain(const DomainAst &d) {
    std::ostringstream os;
    os << "(define (domain " << d.name << ")\n";
    os << "  (:requirements";
    for (const auto &r : d.requirements)
        os << " " << r;
    os << ")\n";
    if (!d.types.empty()) {
        os << "  (:types ";
        for (const auto &t : d.types)
            os << t << " - object ";
        os << ")\n";
    }
    os << "  (:predicates\n";
    for (const auto &p : d.predicates) {
        os << "    (" << p.name << " ";
        print_typed_list(os, p.params);
        os << ")\n";
    }
    os << "  )\n";
    for (const auto &a : d.actions) {
        os << "  (:action " << a.name << "\n";
        os << "    :parameters (";
        print_typed_list(os, a.params);
        os << ")\n";
        os << "    :precondition (and";
        for (const auto &atom : a.preconditions)
            os << " " << atom.str();
        os << ")\n";
        os << "    :effect (and";
        for (const auto &atom : a.add_effects)
            os << " " << atom.str();
        for (const auto &atom : a.del_effects)
            os << " (not " << atom.str() << ")";
        os << ")\n";
        os << "  )\n";
    }
    os << ")\n";
    return os.str();
}

inline std::string print_problem(const ProblemAst &p) {
    std::ostringstream os;
    os << "(define (problem " << p.name << ")\n";
    os << "  (:domain " << p.domain_name << ")\n";
    os << "  (:objects ";
    print_typed_list(os, p.objects);
    os << ")\n";
    os << "  (:init\n";
    for (const auto &a : p.init)
        os << "    " << a.str() << "\n";
    os << "  )\n";
    os << "  (:goal (and";
    for (const auto &a : p.goal)
        os << " " << a.str();
    os << "))\n";
    os << ")\n";
    return os.str();
}

} // namespace planrl::pddl
