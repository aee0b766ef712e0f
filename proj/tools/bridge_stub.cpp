// Test double for the estimator bridge: serves the exact conditional of an
// SCM spec (json path in argv[1]) over the line protocol, plus a constant
// 0.5 label posterior when --labels is given.

#include "seq2cause/density.hpp"
#include "seq2cause/scm.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: bridge_stub <scm.json> [--labels K]\n";
        return 2;
    }
    int n_labels = 0;
    for (int i = 2; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--labels") n_labels = std::atoi(argv[i + 1]);

    std::ifstream f(argv[1], std::ios::binary);
    if (!f) {
        std::cerr << "cannot open " << argv[1] << "\n";
        return 2;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    s2c::ExactOracle oracle(s2c::scm_from_json(ss.str()));

    std::string line;
    while (std::getline(std::cin, line)) {
        nlohmann::json resp;
        try {
            auto req = nlohmann::json::parse(line);
            std::string op = req.at("op").get<std::string>();
            auto prefix = req.at("prefix").get<std::vector<s2c::TokenId>>();
            if (op == "next_dist") {
                resp["probs"] = oracle.next_event_dist(
                    std::span<const s2c::TokenId>(prefix.data(), prefix.size()));
            } else if (op == "label_post") {
                resp["probs"] = std::vector<double>(n_labels, 0.5);
            } else {
                resp["error"] = "unknown op " + op;
            }
        } catch (const std::exception& e) {
            resp["error"] = e.what();
        }
        std::cout << resp.dump() << "\n" << std::flush;
    }
    return 0;
}
