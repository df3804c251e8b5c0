#include "navprune/worldgen.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>

#include "navprune/linalg.hpp"
#include "navprune/vocabulary.hpp"

namespace navprune {

namespace {

const std::vector<std::string>& landmark_names() {
    static const std::vector<std::string> names = {
        "stairs",   "kitchen",  "hallway", "door",     "table",    "sofa",      "bedroom",
        "bathroom", "window",   "landing", "counter",  "lamp",     "rug",       "plant",
        "desk",     "shelf",    "mirror",  "closet",   "fireplace", "painting", "bench",
        "sink",     "bed",      "chair",   "archway",  "balcony",  "railing",   "corridor",
        "entrance", "garage",   "patio",   "piano",    "fridge",   "bookcase",  "doorway",
        "pillar",   "staircase", "dresser", "bathtub", "oven",     "television", "cabinet"};
    return names;
}

std::vector<std::string> filler_words() {
    std::vector<std::string> out(function_words().begin(), function_words().end());
    out.push_back(".");
    out.push_back(",");
    return out;
}

}  // namespace

std::optional<std::size_t> HouseGraph::distance(NodeId a, NodeId b) const {
    std::vector<std::size_t> dist(nodes.size(), SIZE_MAX);
    std::deque<NodeId> queue{a};
    dist.at(a) = 0;
    while (!queue.empty()) {
        const NodeId x = queue.front();
        queue.pop_front();
        if (x == b) return dist[x];
        for (NodeId y : adjacency[x])
            if (dist[y] == SIZE_MAX) {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
    }
    return std::nullopt;
}

void HouseGraph::validate(std::size_t max_degree) const {
    if (nodes.size() != adjacency.size()) throw std::logic_error("node/adjacency size mismatch");
    if (start == goal) throw std::logic_error("start equals goal");
    if (gt_path.size() < 2 || gt_path.front() != start || gt_path.back() != goal)
        throw std::logic_error("gt_path does not join start and goal");
    std::set<NodeId> seen(gt_path.begin(), gt_path.end());
    if (seen.size() != gt_path.size()) throw std::logic_error("gt_path is not simple");
    for (std::size_t i = 1; i < gt_path.size(); ++i)
        if (!adjacency.at(gt_path[i - 1]).count(gt_path[i]))
            throw std::logic_error("gt_path uses a missing edge");
    for (NodeId v = 0; v < adjacency.size(); ++v) {
        if (adjacency[v].size() > max_degree) throw std::logic_error("degree above max_degree");
        for (NodeId u : adjacency[v])
            if (u == v || !adjacency.at(u).count(v)) throw std::logic_error("adjacency not symmetric");
    }
    for (NodeId v = 0; v < nodes.size(); ++v)
        if (!distance(start, v)) throw std::logic_error("graph is not connected");
}

HouseGraph generate_house(std::uint64_t seed, std::size_t n_nodes, std::size_t path_len,
                          std::size_t max_degree, const HouseOptions& options) {
    if (max_degree < 2) throw std::invalid_argument("max_degree must be at least 2");
    if (path_len < 2 || path_len >= n_nodes)
        throw std::invalid_argument("path_len must be in [2, n_nodes)");
    if (options.region_span < 1) throw std::invalid_argument("region_span must be positive");
    Rng rng(mix_seed(seed, 1));
    const std::size_t path_nodes = path_len;

    // Build on provisional ids 0..n-1 with the path first, then relabel.
    std::vector<std::set<NodeId>> adj(n_nodes);
    std::vector<std::size_t> region(n_nodes, 0);
    for (std::size_t i = 0; i < path_nodes; ++i) {
        region[i] = i / options.region_span;
        if (i) {
            adj[i].insert(i - 1);
            adj[i - 1].insert(i);
        }
    }
    std::size_t regions = (path_nodes - 1) / options.region_span + 1;
    for (std::size_t v = path_nodes; v < n_nodes; ++v) {
        std::vector<NodeId> open;
        for (NodeId u = 0; u < v; ++u)
            if (adj[u].size() < max_degree) open.push_back(u);
        if (open.empty()) throw std::invalid_argument("infeasible house: no node below max_degree");
        const NodeId u = open[rng.below(open.size())];
        adj[u].insert(v);
        adj[v].insert(u);
        if (u + 1 < path_nodes && rng.bernoulli(options.lookalike_rate)) region[v] = region[u + 1];
        else if (rng.bernoulli(options.new_region_rate)) region[v] = regions++;
        else region[v] = region[u];
    }
    const auto attempts = static_cast<std::size_t>(options.extra_edge_rate * static_cast<double>(n_nodes));
    for (std::size_t t = 0; t < attempts; ++t) {
        const NodeId a = rng.below(n_nodes);
        const NodeId b = rng.below(n_nodes);
        if (a == b || adj[a].count(b) || adj[a].size() >= max_degree || adj[b].size() >= max_degree)
            continue;
        if (a < path_nodes && b < path_nodes) continue;  // keep gt_path a simple path
        adj[a].insert(b);
        adj[b].insert(a);
    }

    std::vector<NodeId> label(n_nodes);
    for (NodeId i = 0; i < n_nodes; ++i) label[i] = i;
    rng.shuffle(label);

    const auto& names = landmark_names();
    HouseGraph g;
    g.nodes.resize(n_nodes);
    g.adjacency.resize(n_nodes);
    for (NodeId i = 0; i < n_nodes; ++i) {
        const NodeId id = label[i];
        g.nodes[id] = {id, region[i], names[rng.below(names.size())]};
        for (NodeId j : adj[i]) g.adjacency[id].insert(label[j]);
    }
    for (std::size_t i = 0; i < path_nodes; ++i) g.gt_path.push_back(label[i]);
    g.start = g.gt_path.front();
    g.goal = g.gt_path.back();
    g.validate(max_degree);
    return g;
}

namespace {

// Random unit vector orthogonal to the given unit vectors.
std::vector<double> orthogonal_direction(Rng& rng, std::size_t dim, const std::vector<std::vector<double>>& against) {
    auto z = rng.unit_vector(dim);
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : against) {
            const double p = dot(z, b) / dot(b, b);
            for (std::size_t c = 0; c < dim; ++c) z[c] -= p * b[c];
        }
    return normalized(z);
}

}  // namespace

PanoramaSpec generate_panoramas(const HouseGraph& house, std::size_t hidden_dim, double sigma_feat,
                                std::uint64_t seed, const PanoramaOptions& options) {
    if (options.views < 1) throw std::invalid_argument("views must be positive");
    Rng rng(mix_seed(seed, 2));
    const std::size_t n = house.nodes.size();
    std::size_t regions = 0;
    for (const auto& node : house.nodes) regions = std::max(regions, node.region + 1);
    std::vector<std::vector<double>> region_dirs;
    for (std::size_t r = 0; r < regions; ++r) region_dirs.push_back(rng.unit_vector(hidden_dim));

    PanoramaSpec spec;
    const double rho = options.region_correlation;
    auto separated = [&](const std::vector<double>& x) {
        for (const auto& y : spec.landmarks)
            if (std::abs(dot(x, y)) >= options.max_landmark_cosine) return false;
        return true;
    };
    for (NodeId v = 0; v < n; ++v) {
        std::vector<double> x;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            const auto g = rng.unit_vector(hidden_dim);
            x.assign(hidden_dim, 0.0);
            for (std::size_t c = 0; c < hidden_dim; ++c)
                x[c] = std::sqrt(rho) * region_dirs[house.nodes[v].region][c] + std::sqrt(1.0 - rho) * g[c];
            x = normalized(x);
            ok = separated(x);
        }
        // Region too crowded: drop the region component.
        for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
            x = rng.unit_vector(hidden_dim);
            ok = separated(x);
        }
        if (!ok) throw std::runtime_error("could not separate landmark features");
        spec.landmarks.push_back(std::move(x));
    }

    const std::size_t views = options.views;
    for (NodeId v = 0; v < n; ++v) {
        const std::vector<NodeId> nb(house.adjacency[v].begin(), house.adjacency[v].end());
        if (nb.size() > views) throw std::invalid_argument("node degree exceeds view count");
        std::vector<View> pano(views);
        std::vector<bool> taken(views, false);
        // Per action heading: its landmark and the remainders already used beside it.
        std::vector<std::vector<std::vector<double>>> basis(views);
        if (!nb.empty()) {
            const std::size_t spacing = views / nb.size();
            const std::size_t offset = rng.below(views);
            std::vector<std::size_t> slot(nb.size());
            for (std::size_t i = 0; i < nb.size(); ++i) slot[i] = i;
            rng.shuffle(slot);
            for (std::size_t i = 0; i < nb.size(); ++i) {
                const std::size_t h = (offset + slot[i] * spacing) % views;
                const auto& lm = spec.landmarks[nb[i]];
                View view{ViewKind::action, nb[i], std::nullopt, {}};
                basis[h] = {lm};
                if (rng.bernoulli(options.occlusion_rate)) {
                    // Fixed cosine to the landmark, random orthogonal remainder.
                    const auto z = orthogonal_direction(rng, hidden_dim, basis[h]);
                    basis[h].push_back(z);
                    const double a = options.occlusion_cosine;
                    view.feature.resize(hidden_dim);
                    for (std::size_t c = 0; c < hidden_dim; ++c)
                        view.feature[c] = a * lm[c] + std::sqrt(1.0 - a * a) * z[c];
                } else {
                    view.feature = lm;
                    if (sigma_feat > 0.0) {
                        for (double& f : view.feature) f += sigma_feat * rng.normal();
                        view.feature = normalized(view.feature);
                    }
                }
                pano[h] = std::move(view);
                taken[h] = true;
            }
        }
        for (std::size_t h = 0; h < views; ++h) {
            if (taken[h]) continue;
            std::optional<NodeId> owner;
            std::size_t owner_heading = 0;
            for (std::size_t nbh : {(h + views - 1) % views, (h + 1) % views})
                if (views > 1 && taken[nbh]) owner = pano[nbh].destination, owner_heading = nbh;
            View view{ViewKind::background, std::nullopt, owner, {}};
            if (owner) {
                // Remainders orthogonal to everything beside the same action view,
                // so pooled matches depend only on which views survive.
                auto& used = basis[owner_heading];
                const auto u = orthogonal_direction(rng, hidden_dim, used);
                used.push_back(u);
                const double c = options.context_cosine;
                const auto& lm = spec.landmarks[*owner];
                view.feature.resize(hidden_dim);
                for (std::size_t k = 0; k < hidden_dim; ++k) view.feature[k] = c * lm[k] + std::sqrt(1.0 - c * c) * u[k];
            } else {
                view.feature = rng.unit_vector(hidden_dim);
            }
            pano[h] = std::move(view);
        }
        spec.panoramas.push_back(std::move(pano));
    }
    return spec;
}

std::size_t SyntheticInstruction::relevant_count() const {
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const InstructionToken& t) { return t.relevant; }));
}

std::string SyntheticInstruction::text() const {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t.text;
    }
    return out;
}

SyntheticInstruction generate_instruction(const HouseGraph& house, const PanoramaSpec& panoramas,
                                          double filler_rate, std::uint64_t seed) {
    if (filler_rate < 0.0 || filler_rate >= 1.0)
        throw std::invalid_argument("filler_rate must be in [0, 1)");
    Rng rng(mix_seed(seed, 3));
    const std::size_t landmarks = house.gt_path.size() - 1;
    const auto fillers = static_cast<std::size_t>(
        std::llround(filler_rate / (1.0 - filler_rate) * static_cast<double>(landmarks)));
    const std::size_t dim = panoramas.landmarks.empty() ? 0 : panoramas.landmarks.front().size();

    std::vector<bool> is_filler(landmarks + fillers, false);
    std::fill(is_filler.begin(), is_filler.begin() + static_cast<std::ptrdiff_t>(fillers), true);
    rng.shuffle(is_filler);

    const auto words = filler_words();
    SyntheticInstruction ins;
    ins.tokens.push_back({kStartToken, rng.unit_vector(dim), false, std::nullopt});
    std::size_t next = 1;
    for (bool filler : is_filler) {
        if (filler) {
            ins.tokens.push_back({words[rng.below(words.size())], rng.unit_vector(dim), false, std::nullopt});
        } else {
            const NodeId dest = house.gt_path[next++];
            ins.tokens.push_back({house.nodes[dest].name, panoramas.landmarks[dest], true, dest});
        }
    }
    ins.tokens.push_back({kEndToken, rng.unit_vector(dim), false, std::nullopt});
    return ins;
}

void OracleConfig::validate() const {
    if (p_flip < 0.0 || p_flip > 1.0) throw std::invalid_argument("p_flip must be in [0, 1]");
    if (sigma_feat < 0.0) throw std::invalid_argument("sigma_feat must be nonnegative");
    if (score_noise < 0.0) throw std::invalid_argument("score_noise must be nonnegative");
}

ImportanceScores importance_oracle(const SyntheticInstruction& instruction, const OracleConfig& config) {
    config.validate();
    Rng rng(mix_seed(config.seed, 4));
    ImportanceScores scores;
    for (TokenId id = 0; id < instruction.tokens.size(); ++id) {
        const bool relevant = instruction.tokens[id].relevant;
        double s = (relevant ? 1.0 : 0.2) + config.score_noise * rng.normal();
        const bool flip = rng.bernoulli(config.p_flip);
        if (!relevant && flip) s += config.boost;
        scores[id] = std::max(0.0, s);
    }
    return scores;
}

double node_importance(const HouseGraph& house, NodeId node, const OracleConfig& config, Rng& rng) {
    const bool on_path = std::find(house.gt_path.begin(), house.gt_path.end(), node) != house.gt_path.end();
    return std::max(0.0, (on_path ? 1.0 : 0.2) + config.score_noise * rng.normal());
}

World generate_world(const WorldParams& params, std::uint64_t seed) {
    World w;
    w.seed = seed;
    w.params = params;
    std::size_t path_len = params.path_len;
    if (path_len == 0) {
        if (params.path_min < 2 || params.path_max < params.path_min)
            throw std::invalid_argument("invalid path length range");
        Rng rng(mix_seed(seed, 0));
        path_len = params.path_min + rng.below(params.path_max - params.path_min + 1);
    }
    w.house = generate_house(seed, params.n_nodes, path_len, params.max_degree, params.house);
    w.panoramas = generate_panoramas(w.house, params.hidden_dim, params.sigma_feat, seed, params.panorama);
    w.instruction = generate_instruction(w.house, w.panoramas, params.filler_rate, seed);
    return w;
}

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void put_vector(std::ostringstream& out, const std::vector<double>& v) {
    for (double x : v) out << ' ' << fmt_double(x);
}

std::string opt_id(const std::optional<NodeId>& id) { return id ? std::to_string(*id) : "-"; }

class Reader {
public:
    explicit Reader(std::string_view text) : in_{std::string(text)} {}

    std::string word() {
        std::string w;
        if (!(in_ >> w)) throw std::runtime_error("world file truncated");
        return w;
    }
    void expect(const std::string& w) {
        const std::string got = word();
        if (got != w) throw std::runtime_error("world file: expected '" + w + "', got '" + got + "'");
    }
    std::size_t size() { return std::stoull(word()); }
    std::uint64_t u64() { return std::stoull(word()); }
    double real() { return std::strtod(word().c_str(), nullptr); }
    std::optional<NodeId> opt() {
        const std::string w = word();
        if (w == "-") return std::nullopt;
        return std::stoull(w);
    }
    std::vector<double> vec(std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = real();
        return v;
    }

private:
    std::istringstream in_;
};

}  // namespace

std::string serialize_world(const World& w) {
    std::ostringstream out;
    const WorldParams& p = w.params;
    const std::size_t dim = p.hidden_dim;
    out << "navprune-world v1\n";
    out << "seed " << w.seed << '\n';
    out << "params " << p.n_nodes << ' ' << p.path_len << ' ' << p.path_min << ' ' << p.path_max << ' '
        << p.max_degree << ' ' << p.hidden_dim << ' ' << fmt_double(p.sigma_feat) << ' '
        << fmt_double(p.filler_rate) << '\n';
    out << "house " << p.house.region_span << ' ' << fmt_double(p.house.new_region_rate) << ' '
        << fmt_double(p.house.lookalike_rate) << ' ' << fmt_double(p.house.extra_edge_rate) << '\n';
    out << "panorama " << p.panorama.views << ' ' << fmt_double(p.panorama.region_correlation) << ' '
        << fmt_double(p.panorama.max_landmark_cosine) << ' ' << fmt_double(p.panorama.occlusion_rate)
        << ' ' << fmt_double(p.panorama.occlusion_cosine) << ' '
        << fmt_double(p.panorama.context_cosine) << '\n';
    out << "nodes " << w.house.nodes.size() << '\n';
    for (const auto& n : w.house.nodes) {
        out << "node " << n.id << ' ' << n.region << ' ' << n.name;
        out << " adj " << w.house.adjacency[n.id].size();
        for (NodeId u : w.house.adjacency[n.id]) out << ' ' << u;
        out << '\n';
    }
    out << "path " << w.house.gt_path.size();
    for (NodeId v : w.house.gt_path) out << ' ' << v;
    out << '\n';
    for (std::size_t v = 0; v < w.panoramas.landmarks.size(); ++v) {
        out << "landmark " << v;
        put_vector(out, w.panoramas.landmarks[v]);
        out << '\n';
    }
    for (std::size_t v = 0; v < w.panoramas.panoramas.size(); ++v) {
        for (std::size_t h = 0; h < w.panoramas.panoramas[v].size(); ++h) {
            const View& view = w.panoramas.panoramas[v][h];
            out << "view " << v << ' ' << h << ' ' << (view.kind == ViewKind::action ? 'a' : 'b') << ' '
                << opt_id(view.destination) << ' ' << opt_id(view.context_of);
            put_vector(out, view.feature);
            out << '\n';
        }
    }
    out << "instruction " << w.instruction.tokens.size() << '\n';
    for (const auto& t : w.instruction.tokens) {
        out << "token " << t.text << ' ' << (t.relevant ? 1 : 0) << ' ' << opt_id(t.landmark);
        put_vector(out, t.embedding);
        out << '\n';
    }
    out << "end\n";
    (void)dim;
    return out.str();
}

World parse_world(std::string_view text) {
    Reader r(text);
    if (r.word() != "navprune-world" || r.word() != "v1")
        throw std::runtime_error("world version header mismatch");
    World w;
    r.expect("seed");
    w.seed = r.u64();
    WorldParams& p = w.params;
    r.expect("params");
    p.n_nodes = r.size();
    p.path_len = r.size();
    p.path_min = r.size();
    p.path_max = r.size();
    p.max_degree = r.size();
    p.hidden_dim = r.size();
    p.sigma_feat = r.real();
    p.filler_rate = r.real();
    r.expect("house");
    p.house.region_span = r.size();
    p.house.new_region_rate = r.real();
    p.house.lookalike_rate = r.real();
    p.house.extra_edge_rate = r.real();
    r.expect("panorama");
    p.panorama.views = r.size();
    p.panorama.region_correlation = r.real();
    p.panorama.max_landmark_cosine = r.real();
    p.panorama.occlusion_rate = r.real();
    p.panorama.occlusion_cosine = r.real();
    p.panorama.context_cosine = r.real();

    r.expect("nodes");
    const std::size_t n = r.size();
    w.house.nodes.resize(n);
    w.house.adjacency.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.expect("node");
        const NodeId id = r.size();
        if (id >= n) throw std::runtime_error("world file: node id out of range");
        w.house.nodes[id].id = id;
        w.house.nodes[id].region = r.size();
        w.house.nodes[id].name = r.word();
        r.expect("adj");
        const std::size_t deg = r.size();
        for (std::size_t k = 0; k < deg; ++k) w.house.adjacency[id].insert(r.size());
    }
    r.expect("path");
    const std::size_t plen = r.size();
    for (std::size_t i = 0; i < plen; ++i) w.house.gt_path.push_back(r.size());
    if (w.house.gt_path.empty()) throw std::runtime_error("world file: empty path");
    w.house.start = w.house.gt_path.front();
    w.house.goal = w.house.gt_path.back();
    for (std::size_t v = 0; v < n; ++v) {
        r.expect("landmark");
        if (r.size() != v) throw std::runtime_error("world file: landmark order");
        w.panoramas.landmarks.push_back(r.vec(p.hidden_dim));
    }
    w.panoramas.panoramas.assign(n, std::vector<View>(p.panorama.views));
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t h = 0; h < p.panorama.views; ++h) {
            r.expect("view");
            if (r.size() != v || r.size() != h) throw std::runtime_error("world file: view order");
            View& view = w.panoramas.panoramas[v][h];
            view.kind = r.word() == "a" ? ViewKind::action : ViewKind::background;
            view.destination = r.opt();
            view.context_of = r.opt();
            view.feature = r.vec(p.hidden_dim);
        }
    }
    r.expect("instruction");
    const std::size_t tokens = r.size();
    for (std::size_t i = 0; i < tokens; ++i) {
        r.expect("token");
        InstructionToken t;
        t.text = r.word();
        t.relevant = r.word() == "1";
        t.landmark = r.opt();
        t.embedding = r.vec(p.hidden_dim);
        w.instruction.tokens.push_back(std::move(t));
    }
    r.expect("end");
    w.house.validate(p.max_degree);
    return w;
}

}  // namespace navprune
