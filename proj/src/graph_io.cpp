#include "specopt/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace specopt
{

nlohmann::json graph_to_json(const ParameterGraph& g)
{
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges())
        edges.push_back({e.i, e.j, e.w});
    return {{"n", g.n_nodes()}, {"edges", std::move(edges)}};
}

ParameterGraph graph_from_json(const nlohmann::json& doc, const std::string& where)
{
    if (!doc.is_object())
        throw ParseError(where + ": expected an object with \"n\" and \"edges\"");
    for (const auto& [key, value] : doc.items())
        if (key != "n" && key != "edges")
            throw ParseError(where + "." + key + ": unknown key");
    if (!doc.contains("n") || !doc["n"].is_number_integer() || doc["n"].get<long long>() < 1)
        throw ParseError(where + ".n: expected a positive integer");
    const auto n = doc["n"].get<Index>();

    std::vector<Edge> edges;
    if (doc.contains("edges"))
    {
        const auto& list = doc["edges"];
        if (!list.is_array())
            throw ParseError(where + ".edges: expected an array");
        for (std::size_t k = 0; k < list.size(); ++k)
        {
            const auto& e = list[k];
            const std::string at = where + ".edges[" + std::to_string(k) + "]";
            if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
                !e[2].is_number())
                throw ParseError(at + ": expected [i, j, w] with integer i, j");
            edges.push_back({e[0].get<Index>(), e[1].get<Index>(), e[2].get<double>()});
        }
    }
    try
    {
        return ParameterGraph::from_edge_list(n, edges);
    }
    catch (const std::invalid_argument& ex)
    {
        throw ParseError(where + ".edges: " + ex.what());
    }
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError(path.string() + ": cannot open file");
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& ex)
    {
        throw ParseError(path.string() + ": malformed JSON (" + ex.what() + ")");
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out.flush())
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace specopt
