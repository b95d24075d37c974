// Attack a synthetic objective with a correlated prior, with and without the prior.
#include <cstdio>

#include <pbo/pbo.hpp>

int main()
{
    for (pbo::Method m : {pbo::Method::pbo_adaptive, pbo::Method::bo}) {
        // f and its prior f' share cosine 0.8 in the kernel's RKHS
        auto pair = pbo::make_pair(8, 0.8, 42);
        pbo::RunConfig cfg;
        cfg.method = m;
        cfg.budget = 200;
        cfg.seed = 1;
        const pbo::RunRecord r = pbo::run_method(pair.f, pair.prior, cfg);
        std::printf("%-12s success=%d queries=%zu best=%.4f threshold=%.4f", pbo::method_label(cfg).c_str(),
                    r.success ? 1 : 0, r.queries, r.best_trace.back(), pair.f.threshold());
        if (!r.lambda_trace.empty())
            std::printf(" final lambda=%.3f", r.lambda_trace.back());
        std::printf("\n");
    }
}
