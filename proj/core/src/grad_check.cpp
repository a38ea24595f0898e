#include "glora/grad_check.hpp"

#include <algorithm>
#include <sstream>

namespace glora {

std::string GradCheckReport::str() const {
    std::ostringstream os;
    os << "grad_check: " << checked << " elements, max rel err " << max_rel_err << ", " << failures.size()
       << " failures";
    for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 8); ++i) {
        const auto& f = failures[i];
        os << "\n  input " << f.input << " elem " << f.element << ": analytic " << f.analytic << " numeric "
           << f.numeric << " rel " << f.rel_err;
    }
    return os.str();
}

GradCheckReport grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                           double h, double tol) {
    for (auto& t : inputs) {
        t.requires_grad = true;
        t.zero_grad();
    }
    std::vector<std::vector<double>> analytic(inputs.size());
    {
        Tape tape;
        Tensor loss = f(inputs);
        backward(loss);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            analytic[i] = inputs[i].grad ? *inputs[i].grad : std::vector<double>(inputs[i].numel(), 0.0);
        }
    }
    auto eval = [&]() {
        Tape tape;  // fresh tape so probe evaluations never touch the checked graph
        return f(inputs).value();
    };
    GradCheckReport report;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
            const double keep = inputs[i].at(e);
            inputs[i].at(e) = keep + h;
            const double up = eval();
            inputs[i].at(e) = keep - h;
            const double down = eval();
            inputs[i].at(e) = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double an = analytic[i][e];
            const double rel = std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), 1e-4});
            report.max_rel_err = std::max(report.max_rel_err, rel);
            ++report.checked;
            if (rel > tol) report.failures.push_back({i, e, an, numeric, rel});
        }
    }
    return report;
}

}  // namespace glora
