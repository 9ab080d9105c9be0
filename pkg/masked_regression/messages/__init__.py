# masked-regression message catalogs
