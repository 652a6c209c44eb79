# lptsp - Lp TSP / All-Norm TSP ソルバー
