// Line-protocol test server: f(x) = -||x||^2 over [-1,1]^dim.
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

int main(int argc, char** argv)
{
    CLI::App app{"quadratic objective server (newline-delimited JSON on stdin/stdout)"};
    int dim = 2;
    double threshold = -0.01;
    bool malformed = false;
    int fail_after = -1;
    app.add_option("--dim", dim, "input dimension")->check(CLI::PositiveNumber);
    app.add_option("--threshold", threshold, "success threshold reported in the handshake");
    app.add_flag("--malformed", malformed, "answer eval requests with a broken line");
    app.add_option("--exit-after", fail_after, "exit after this many eval requests");
    CLI11_PARSE(app, argc, argv);

    int evals = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(line);
        }
        catch (const nlohmann::json::exception&) {
            std::cout << nlohmann::json{{"error", "unparseable request"}}.dump() << std::endl;
            continue;
        }
        const std::string op = req.value("op", "");
        if (op == "hello") {
            std::cout << nlohmann::json{{"dim", dim}, {"threshold", threshold}}.dump() << std::endl;
        }
        else if (op == "eval") {
            if (fail_after >= 0 && evals >= fail_after)
                return 0;
            ++evals;
            if (malformed) {
                std::cout << "{\"y\": oops" << std::endl;
                continue;
            }
            const auto& x = req["x"];
            if (!x.is_array() || static_cast<int>(x.size()) != dim) {
                std::cout << nlohmann::json{{"error", "x must have " + std::to_string(dim) + " entries"}}.dump()
                          << std::endl;
                continue;
            }
            double s = 0.0;
            for (const auto& v : x)
                s += v.get<double>() * v.get<double>();
            std::cout << nlohmann::json{{"y", -s}}.dump() << std::endl;
        }
        else {
            std::cout << nlohmann::json{{"error", "unknown op"}}.dump() << std::endl;
        }
    }
    return 0;
}
