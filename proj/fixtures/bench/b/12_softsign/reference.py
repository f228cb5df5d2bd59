# reference for Softsign
